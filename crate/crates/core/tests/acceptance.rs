//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{finite_difference_check, random_tensor, rel_err, rng, Grid};
use depthedge_core::bokeh::{apply_bokeh, blur_rgb, BokehParams};
use depthedge_core::graph::{count_macs, count_params, pydnet_preset, random_weights, PydnetConfig};
use depthedge_core::losses::{
    distill_loss, distill_loss_grad, gradient_loss, gradient_loss_grad, photometric_error, photometric_mean, photometric_mean_grad,
    smoothness_loss, smoothness_loss_grad, ssim, warp, warp_grid, CameraIntrinsics, DistillConfig, RelativePose,
    DEFAULT_ALPHA,
};
use depthedge_core::metrics::{compute_metrics, lsq_align_inverse, median_align};
use depthedge_core::scale_align::{ransac_scale, AlignMode, RansacConfig, SparseAnchor};
use depthedge_core::tensor::{bilinear_sample, conv2d, resize_bilinear, ConvParams, SamplingGrid};
use depthedge_core::timing;
use depthedge_core::{DepthMap, Dims, Network, RgbImage, Tensor, WeightStore, WeightTensor};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn params_count() -> Outcome {
    let start = Instant::now();
    let params = count_params(&pydnet_preset((384, 640)).map_err(|e| e.to_string())?) as f64;
    let elapsed = start.elapsed();
    let target = 1.97e6;
    check(
        (params - target).abs() <= 0.10 * target && elapsed < Duration::from_secs(1),
        format!("{params} params vs 1.97 M +-10%, {elapsed:?}"),
    )
}

fn macs_count() -> Outcome {
    let start = Instant::now();
    let spec = pydnet_preset((384, 640)).map_err(|e| e.to_string())?;
    let macs = count_macs(&spec, (384, 640)).map_err(|e| e.to_string())? as f64;
    let elapsed = start.elapsed();
    let target = 9.25e9;
    check(
        (macs - target).abs() <= 0.15 * target && elapsed < Duration::from_secs(1),
        format!("{:.4} GMAC at 640x384 vs 9.25 +-15%, {elapsed:?}", macs / 1e9),
    )
}

fn bench_latency() -> Outcome {
    let run = |w: usize, h: usize| -> Result<timing::LatencyStats, String> {
        let spec = pydnet_preset((h, w)).map_err(|e| e.to_string())?;
        let net = Network::build(spec.clone(), &random_weights(&spec, 1)).map_err(|e| e.to_string())?;
        let input = Tensor::from_fn(Dims::new(1, 3, h, w), |_, c, y, x| ((c * 11 + y * 7 + x * 3) % 256) as f32 / 255.0);
        timing::measure(timing::DEFAULT_WARMUP, timing::DEFAULT_ITERATIONS, || net.infer(&input).map(drop))
            .map_err(|e| e.to_string())
    };
    let full = run(640, 384)?;
    let small = run(320, 192)?;
    let ordered = full.min <= full.mean && full.mean <= full.max && full.iterations == 50;
    // Four times the pixels: linear scaling predicts a ratio of 4.
    let ratio = full.mean.as_secs_f64() / small.mean.as_secs_f64();
    check(
        ordered && (2.0..=8.0).contains(&ratio),
        format!(
            "640x384 mean {:?} (min {:?}, max {:?}, {:.2} fps); 320x192 mean {:?}; ratio {ratio:.2} in [2, 8]",
            full.mean,
            full.min,
            full.max,
            full.fps(),
            small.mean
        ),
    )
}

fn kernel_oracles() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    let mut counts = [0usize; 3];
    for case in 0..200 {
        let err = match case % 3 {
            0 => {
                let (ic, oc) = (r.random_range(1..=8), r.random_range(1..=8));
                let k = [1, 3, 5][r.random_range(0..3)];
                let stride = r.random_range(1..=2);
                let pad = r.random_range(0..=k / 2);
                let (h, w) = (r.random_range(k..=20), r.random_range(k..=20));
                let input = random_tensor(&mut r, Dims::new(1, ic, h, w), -1.0, 1.0);
                let kernel = random_tensor(&mut r, Dims::new(oc, ic, k, k), -1.0, 1.0);
                let bias: Vec<f32> = (0..oc).map(|_| r.random_range(-0.5..0.5)).collect();
                let params = ConvParams::new(kernel.clone(), bias.clone(), stride, pad).map_err(|e| e.to_string())?;
                let out = conv2d(&input, &params).map_err(|e| e.to_string())?;
                let kd: Vec<f64> = kernel.data().iter().map(|&v| v as f64).collect();
                let bd: Vec<f64> = bias.iter().map(|&v| v as f64).collect();
                let oracle = common::conv(&Grid::from_tensor(&input), &kd, &bd, oc, k, stride, pad);
                if (oracle.h, oracle.w) != (out.dims().h, out.dims().w) {
                    return Err(format!("case {case}: conv dims {:?} vs oracle {}x{}", out.dims(), oracle.h, oracle.w));
                }
                rel_err(out.data(), &oracle.data)
            }
            1 => {
                let (c, h, w) = (r.random_range(1..=4), r.random_range(1..=12), r.random_range(1..=12));
                let (oh, ow) = (r.random_range(1..=40), r.random_range(1..=40));
                let input = random_tensor(&mut r, Dims::new(1, c, h, w), -2.0, 2.0);
                let out = resize_bilinear(&input, oh, ow).map_err(|e| e.to_string())?;
                rel_err(out.data(), &common::resize(&Grid::from_tensor(&input), oh, ow).data)
            }
            _ => {
                let (c, h, w) = (r.random_range(1..=4), r.random_range(1..=12), r.random_range(1..=12));
                let image = random_tensor(&mut r, Dims::new(1, c, h, w), -2.0, 2.0);
                let grid = SamplingGrid::from_fn(1, h, w, |_, _, _| {
                    [r.random_range(-3.0..w as f32 + 3.0), r.random_range(-3.0..h as f32 + 3.0)]
                });
                let out = bilinear_sample(&image, &grid).map_err(|e| e.to_string())?;
                let g = Grid::from_tensor(&image);
                let oracle: Vec<f64> = (0..c)
                    .flat_map(|ch| (0..h * w).map(move |i| (ch, i)))
                    .map(|(ch, i)| {
                        let [x, y] = grid.coords[i];
                        common::bilinear_at(&g, ch, x as f64, y as f64)
                    })
                    .collect();
                rel_err(out.data(), &oracle)
            }
        };
        counts[case % 3] += 1;
        worst = worst.max(err);
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-5 && elapsed < Duration::from_secs(60),
        format!(
            "200 cases ({} conv, {} resize, {} sample), worst relative error {worst:.2e}, {elapsed:?}",
            counts[0], counts[1], counts[2]
        ),
    )
}

fn graph_oracle() -> Outcome {
    let config = PydnetConfig::scaled_down(8);
    let spec = config.graph((64, 64)).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let store = random_weights(&spec, seed);
        let net = Network::build(spec.clone(), &store).map_err(|e| e.to_string())?;
        let input = random_tensor(&mut rng(100 + seed), Dims::new(1, 3, 64, 64), 0.0, 1.0);
        let depth = net.infer(&input).map_err(|e| e.to_string())?;
        let oracle = common::eval_graph(&spec, &store, &input);
        let diff = depth
            .values()
            .iter()
            .zip(&oracle.data)
            .fold(0.0f64, |m, (&a, &o)| m.max((a as f64 - o).abs()));
        worst = worst.max(diff);
    }
    check(worst <= 1e-5, format!("10 seeds, channel plan /8, max |runtime - oracle| {worst:.2e}"))
}

fn loss_identities() -> Outcome {
    let mut r = rng(7);
    let img = random_tensor(&mut r, Dims::new(1, 3, 8, 8), 0.0, 1.0);
    let pe = photometric_error(&img, &img, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    let pe_max = pe.data().iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let flat = Tensor::full(Dims::new(1, 1, 8, 8), 0.4);
    let smooth = smoothness_loss(&flat, &img).map_err(|e| e.to_string())?;
    let p = random_tensor(&mut r, Dims::new(1, 1, 8, 8), 0.0, 1.0);
    let grad = gradient_loss(&p, &p, 4).map_err(|e| e.to_string())?;
    let distill =
        distill_loss(&[p.clone(), p.clone(), p.clone()], &p, &DistillConfig::default()).map_err(|e| e.to_string())?;
    let s = ssim(&img, &img).map_err(|e| e.to_string())?;
    let ssim_dev = s.data().iter().fold(0.0f32, |m, v| m.max((v - 1.0).abs()));
    check(
        pe_max == 0.0 && smooth == 0.0 && grad == 0.0 && distill == 0.0 && ssim_dev <= 1e-6,
        format!("pe {pe_max}, smooth {smooth}, grad {grad}, distill {distill}, |ssim - 1| {ssim_dev:.1e}"),
    )
}

fn gradient_checks() -> Outcome {
    let mut r = rng(99);
    let h = 1e-3;
    let dims = Dims::new(1, 1, 6, 6);

    // Every loss here has |.| kinks. Inputs keep each kinked quantity at
    // least 10h from zero so that central differences see a linear function.
    let target = random_tensor(&mut r, Dims::new(1, 3, 6, 6), 0.0, 1.0);
    let offset = random_tensor(&mut r, target.dims(), 0.05, 0.3);
    let recon = Tensor::from_fn(target.dims(), |n, c, y, x| {
        let sign = if (c + y + x) % 2 == 0 { 1.0 } else { -1.0 };
        target.at(n, c, y, x) + sign * offset.at(n, c, y, x)
    });
    let g = photometric_mean_grad(&target, &recon, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    let pe = finite_difference_check(&mut r, &recon, &g, 5, h, |x| {
        photometric_mean(&target, x, DEFAULT_ALPHA).unwrap()
    });

    let image = random_tensor(&mut r, Dims::new(1, 3, 6, 6), 0.0, 1.0);
    let noise = random_tensor(&mut r, dims, 0.0, 0.01);
    let depth = Tensor::from_fn(dims, |n, c, y, x| 0.3 + 0.05 * x as f32 + 0.07 * y as f32 + noise.at(n, c, y, x));
    let g = smoothness_loss_grad(&depth, &image).map_err(|e| e.to_string())?;
    let sm = finite_difference_check(&mut r, &depth, &g, 5, h, |x| smoothness_loss(x, &image).unwrap());

    let proxy = random_tensor(&mut r, dims, 0.5, 0.52);
    let noise = random_tensor(&mut r, dims, 0.0, 0.01);
    let pred = Tensor::from_fn(dims, |n, c, y, x| {
        proxy.at(n, c, y, x) + 0.1 + 0.06 * x as f32 + 0.08 * y as f32 + noise.at(n, c, y, x)
    });
    let g = gradient_loss_grad(&pred, &proxy, 2).map_err(|e| e.to_string())?;
    let gl = finite_difference_check(&mut r, &pred, &g, 5, h, |x| gradient_loss(x, &proxy, 2).unwrap());

    let cfg = DistillConfig {
        gradient_scales: 2,
        ..DistillConfig::default()
    };
    let noise = random_tensor(&mut r, Dims::new(1, 1, 3, 3), 0.0, 0.01);
    let coarse = Tensor::from_fn(noise.dims(), |n, c, y, x| 1.0 + 0.3 * x as f32 + 0.5 * y as f32 + noise.at(n, c, y, x));
    let grads = distill_loss_grad(&[pred.clone(), coarse.clone()], &proxy, &cfg).map_err(|e| e.to_string())?;
    let d0 = finite_difference_check(&mut r, &pred, &grads[0], 5, h, |x| {
        distill_loss(&[x.clone(), coarse.clone()], &proxy, &cfg).unwrap()
    });
    let d1 = finite_difference_check(&mut r, &coarse, &grads[1], 5, h, |x| {
        distill_loss(&[pred.clone(), x.clone()], &proxy, &cfg).unwrap()
    });
    let worst = [pe, sm, gl, d0, d1].into_iter().fold(0.0, f64::max);
    check(
        worst <= 1e-2,
        format!(
            "worst relative error over 5 directions: photometric {pe:.1e}, smoothness {sm:.1e}, gradient {gl:.1e}, distill {:.1e}",
            d0.max(d1)
        ),
    )
}

fn warp_checks() -> Outcome {
    let k = CameraIntrinsics::new(60.0, 60.0, 16.0, 12.0).map_err(|e| e.to_string())?;
    let src = random_tensor(&mut rng(5), Dims::new(1, 3, 24, 32), 0.0, 1.0);
    let depth = Tensor::full(Dims::new(1, 1, 24, 32), 4.0);
    let out = warp(&src, &k, &RelativePose::identity(), &k, &depth).map_err(|e| e.to_string())?;
    let id_err = out.data().iter().zip(src.data()).fold(0.0f32, |m, (a, b)| m.max((a - b).abs()));
    let (baseline, z) = (0.2, 3.0);
    let depth = Tensor::full(Dims::new(1, 1, 24, 32), z as f32);
    let grid = warp_grid(&k, &RelativePose::translation([baseline, 0.0, 0.0]), &k, &depth).map_err(|e| e.to_string())?;
    let shift = 60.0 * baseline / z;
    let mut shift_err = 0.0f64;
    for y in 0..24 {
        for x in 0..32 {
            let [u, v] = grid.at(0, y, x);
            shift_err = shift_err.max((u as f64 - x as f64 - shift).abs()).max((v as f64 - y as f64).abs());
        }
    }
    check(
        id_err <= 1e-6 && shift_err <= 0.01,
        format!("identity max error {id_err:.1e}; translation shift {shift} px, max deviation {shift_err:.1e} px"),
    )
}

fn metrics_checks() -> Outcome {
    let rep = compute_metrics(&[2.0, 4.0], &[1.0, 4.0], &[true, true], 80.0).map_err(|e| e.to_string())?;
    let hand = (rep.abs_rel - 0.5).abs() <= 1e-9
        && (rep.sq_rel - 0.5).abs() <= 1e-9
        && (rep.rmse - 0.5f64.sqrt()).abs() <= 1e-9
        && (rep.a1 - 0.5).abs() <= 1e-9;
    let mut r = rng(31);
    let mut monotone = 0;
    for _ in 0..100 {
        let n = r.random_range(1..50);
        let gt: Vec<f32> = (0..n).map(|_| r.random_range(0.5..60.0)).collect();
        let pred: Vec<f32> = gt.iter().map(|&g| g * r.random_range(0.4f32..2.5)).collect();
        let rep = compute_metrics(&pred, &gt, &vec![true; n], 80.0).map_err(|e| e.to_string())?;
        if rep.a1 <= rep.a2 && rep.a2 <= rep.a3 {
            monotone += 1;
        }
    }
    check(
        hand && monotone == 100,
        format!(
            "two-pixel case abs_rel {} sq_rel {} rmse {:.6} a1 {}; a1<=a2<=a3 in {monotone}/100",
            rep.abs_rel, rep.sq_rel, rep.rmse, rep.a1
        ),
    )
}

fn ransac_checks() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut deterministic = true;
    for trial in 0..50u64 {
        let mut r = rng(1000 + trial);
        let (w, h) = (48, 32);
        let map = DepthMap::new(w, h, (0..w * h).map(|_| r.random_range(0.05..0.95)).collect())
            .map_err(|e| e.to_string())?;
        let scale: f64 = r.random_range(0.2..5.0);
        let anchors: Vec<SparseAnchor> = (0..20)
            .map(|i| {
                let (u, v) = (r.random_range(0..w), r.random_range(0..h));
                let clean = 1.0 / (scale * map.at(u, v) as f64);
                let noisy = clean * (1.0 + r.random_range(-0.005..0.005));
                // 8 of 20 anchors are gross outliers.
                let z = if i % 5 < 2 { noisy * r.random_range(2.0..10.0) } else { noisy };
                SparseAnchor { u, v, z }
            })
            .collect();
        let cfg = RansacConfig {
            iterations: 100,
            inlier_tol: 0.05,
            mode: AlignMode::ScaleOnly,
            seed: trial,
        };
        let m = ransac_scale(&map, &anchors, &cfg).map_err(|e| e.to_string())?;
        deterministic &= ransac_scale(&map, &anchors, &cfg).map_err(|e| e.to_string())? == m;
        worst = worst.max((m.scale - scale).abs() / scale);
    }
    let elapsed = start.elapsed();
    check(
        worst <= 0.01 && deterministic && elapsed < Duration::from_secs(5),
        format!("50 trials, 40% outliers: worst scale error {:.3}%, deterministic {deterministic}, {elapsed:?}", worst * 100.0),
    )
}

fn bokeh_checks() -> Outcome {
    let mut r = rng(12);
    let (w, h) = (40, 30);
    let img = RgbImage::from_fn(w, h, |_, _| [r.random(), r.random(), r.random()]);
    let params = BokehParams::default();
    let blurred = blur_rgb(&img, params.kernel_size, params.sigma).map_err(|e| e.to_string())?;
    let depth = DepthMap::new(w, h, (0..w * h).map(|_| r.random_range(0.0..1.0)).collect()).map_err(|e| e.to_string())?;
    let out = apply_bokeh(&img, &depth, &params).map_err(|e| e.to_string())?;
    let mut kept_ok = true;
    let mut blurred_ok = true;
    for y in 0..h {
        for x in 0..w {
            if depth.at(x, y) > params.tau {
                blurred_ok &= out.pixel(x, y) == blurred.pixel(x, y);
            } else {
                kept_ok &= out.pixel(x, y) == img.pixel(x, y);
            }
        }
    }
    let none = apply_bokeh(&img, &DepthMap::filled(w, h, 0.0).unwrap(), &params).map_err(|e| e.to_string())?;
    let all_params = BokehParams { tau: 0.5, ..params };
    let all = apply_bokeh(&img, &DepthMap::filled(w, h, 1.0).unwrap(), &all_params).map_err(|e| e.to_string())?;

    let planar = Grid {
        c: 3,
        h,
        w,
        data: (0..3)
            .flat_map(|c| (0..h * w).map(move |i| (c, i)))
            .map(|(c, i)| img.data()[i * 3 + c] as f64)
            .collect(),
    };
    let oracle = common::gaussian_blur_2d(&planar, params.kernel_size, params.sigma as f64);
    let mut lsb = 0.0f64;
    for c in 0..3 {
        for i in 0..h * w {
            lsb = lsb.max((all.data()[i * 3 + c] as f64 - oracle.data[c * h * w + i]).abs());
        }
    }
    check(
        kept_ok && blurred_ok && none == img && all == blurred && lsb <= 1.0,
        format!(
            "kept bit-identical {kept_ok}, blurred match {blurred_ok}, no-blur identity {}, all-blur = blur {}, all-blur vs 2D oracle within {lsb:.3} LSB",
            none == img,
            all == blurred
        ),
    )
}

fn weight_container() -> Outcome {
    let mut r = rng(77);
    let mut round_trips = 0;
    let mut stores = Vec::new();
    for _ in 0..50 {
        let mut store = WeightStore::new();
        for t in 0..r.random_range(1..6) {
            let rank = r.random_range(1..=4);
            let dims: Vec<usize> = (0..rank).map(|_| r.random_range(1..=5)).collect();
            let len = dims.iter().product();
            let data = (0..len)
                .map(|_| match r.random_range(0..10) {
                    0 => -0.0,
                    1 => f32::from_bits(r.random::<u32>() & 0x807f_ffff),
                    _ => r.random_range(-10.0..10.0),
                })
                .collect();
            let name = format!("layer{t}.{}", ["weight", "bias", "w"][r.random_range(0..3)]);
            store.insert(name, WeightTensor::new(dims, data).unwrap()).unwrap();
        }
        let bytes = store.to_bytes();
        let back = WeightStore::from_bytes(&bytes).map_err(|e| e.to_string())?;
        if back.bit_eq(&store) && back.to_bytes() == bytes {
            round_trips += 1;
        }
        stores.push(bytes);
    }
    let mut detected = 0;
    for i in 0..1000 {
        let mut bytes = stores[i % stores.len()].clone();
        let pos = r.random_range(0..bytes.len());
        bytes[pos] ^= r.random_range(1..=255u8);
        if WeightStore::from_bytes(&bytes).is_err() {
            detected += 1;
        }
    }
    check(
        round_trips == 50 && detected == 1000,
        format!("{round_trips}/50 fuzzed stores round-trip bit-identically; {detected}/1000 single-byte corruptions detected"),
    )
}

fn eval_alignment() -> Outcome {
    let gt = [1.0f32, 2.0, 4.0, 8.0, 0.5, 3.0];
    let pred: Vec<f32> = gt.iter().map(|g| 0.5 / g + 0.1).collect();
    let (s, b) = lsq_align_inverse(&pred, &gt, &[true; 6]).map_err(|e| e.to_string())?;
    let med = median_align(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[true; 3]).map_err(|e| e.to_string())?;
    let scaled: Vec<f32> = gt.iter().map(|g| g * 3.7).collect();
    let aligned = median_align(&scaled, &gt, &[true; 6]).map_err(|e| e.to_string())?;
    let rep = compute_metrics(&aligned, &gt, &[true; 6], 80.0).map_err(|e| e.to_string())?;
    check(
        (s - 2.0).abs() <= 1e-6 && (b + 0.2).abs() <= 1e-6 && med == [2.0, 4.0, 6.0] && rep.abs_rel <= 1e-6,
        format!(
            "score reproduction needs trained weights and datasets (out of scope); alignment oracles: lsq ({s:.6}, {b:.6}), median {med:?}, abs_rel after median {:.1e}",
            rep.abs_rel
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("parameter accounting", params_count),
        ("MAC accounting", macs_count),
        ("bench latency and scaling", bench_latency),
        ("kernel oracle suite", kernel_oracles),
        ("graph oracle", graph_oracle),
        ("loss identities", loss_identities),
        ("finite-difference gradients", gradient_checks),
        ("warp identity and translation", warp_checks),
        ("metrics", metrics_checks),
        ("RANSAC scale recovery", ransac_checks),
        ("bokeh compositing", bokeh_checks),
        ("weight container", weight_container),
        ("evaluation alignment", eval_alignment),
    ];
    let mut failures = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", 13 - failures, 13);
    if failures > 0 {
        std::process::exit(1);
    }
}
