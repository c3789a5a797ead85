//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use axialconv::axial::{adjoint_h, forward_h, forward_h_counted};
use axialconv::experiment::ExperimentConfig;
use axialconv::noise::{add_awgn, power, snr_db};
use axialconv::ops::materialize_operator;
use axialconv::padding::make_pad_2d;
use axialconv::phantom::{make_stack, nrmse, phantom_map, KernelParams, TrfSpec, TABLE_CONFIGS};
use axialconv::solver::{deconvolve, prox_elastic_net, SolverConfig};
use axialconv::verify;
use axialconv::{AxialKernelStack, ForwardModel, Image, PadMode, Snr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn random_stack(rng: &mut ChaCha8Rng, m_t: usize, n_t: usize, m_r: usize, n_r: usize) -> AxialKernelStack<f64> {
    AxialKernelStack::from_fn(m_t, n_t, |_| Ok(Image::random(2 * m_r + 1, 2 * n_r + 1, rng))).unwrap()
}

fn op_norm(model: &ForwardModel<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let (m, n) = model.image_dims();
    let mut v = Image::<f64>::random(m, n, rng);
    let mut s = 0.0;
    for _ in 0..30 {
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        v = v.scaled(1.0 / nv);
        v = model.adjoint(&model.apply(&v).unwrap()).unwrap();
        s = v.norm().sqrt();
    }
    s
}

fn adjoint_correctness() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for n in 0..200 {
        let mode = PadMode::ALL[n % 4];
        let m_t = rng.gen_range(1..=64);
        let n_t = rng.gen_range(1..=64);
        let lim = |r: usize, t: usize| if mode == PadMode::Zero { r } else { r.min(t) };
        let m_r = rng.gen_range(0..=lim(4, m_t));
        let n_r = rng.gen_range(0..=lim(6, n_t));
        let model = ForwardModel::new(random_stack(&mut rng, m_t, n_t, m_r, n_r), mode).unwrap();
        let u = Image::random(m_t, n_t, &mut rng);
        let v = Image::random(m_t, n_t, &mut rng);
        let lhs = model.apply(&u).unwrap().dot(&v).unwrap();
        let rhs = u.dot(&model.adjoint(&v).unwrap()).unwrap();
        let scale = u.norm() * v.norm() * op_norm(&model, &mut rng);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    let secs = t0.elapsed().as_secs_f64();
    check(worst <= 1e-11 && secs < 30.0, format!("200 instances, max normalized mismatch {worst:.2e} (tol 1e-11), {secs:.2}s (limit 30s)"))
}

// Dense H written straight from the row-wise definition: output pixel (i, j)
// of row i_h takes k(i)[p, q] times padded pixel (i + m_k-1-p, j + n_k-1-q).
fn dense_h_oracle(stack: &AxialKernelStack<f64>) -> Vec<Vec<f64>> {
    let (m_t, n_t, m_p) = (stack.m_t(), stack.n_t(), stack.m_p());
    let (mk, nk) = (stack.m_k(), stack.n_k());
    let mut d = vec![vec![0.0; m_p * stack.n_p()]; m_t * n_t];
    for i in 0..m_t {
        let k = stack.kernel(i + 1).unwrap();
        for j in 0..n_t {
            for p in 0..mk {
                for q in 0..nk {
                    let (r, c) = (i + mk - 1 - p, j + nk - 1 - q);
                    d[i + j * m_t][r + c * m_p] += k[(p, q)];
                }
            }
        }
    }
    d
}

fn source(mode: PadMode, pos: isize, len: usize) -> Option<usize> {
    let n = len as isize;
    let idx = match mode {
        PadMode::Zero => pos,
        PadMode::Replicate => pos.clamp(0, n - 1),
        PadMode::Symmetric if pos < 0 => -pos - 1,
        PadMode::Symmetric if pos >= n => 2 * n - 1 - pos,
        PadMode::Symmetric => pos,
        PadMode::Circular => pos.rem_euclid(n),
    };
    (0..n).contains(&idx).then_some(idx as usize)
}

fn dense_pad_oracle(m_t: usize, n_t: usize, m_r: usize, n_r: usize, mode: PadMode) -> Vec<Vec<f64>> {
    let (m_p, n_p) = (m_t + 2 * m_r, n_t + 2 * n_r);
    let mut d = vec![vec![0.0; m_t * n_t]; m_p * n_p];
    for c in 0..n_p {
        for r in 0..m_p {
            let si = source(mode, r as isize - m_r as isize, m_t);
            let sj = source(mode, c as isize - n_r as isize, n_t);
            if let (Some(a), Some(b)) = (si, sj) {
                d[r + c * m_p][a + b * m_t] = 1.0;
            }
        }
    }
    d
}

fn max_rel(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return f64::INFINITY;
    }
    let (a, b) = (a.concat(), b.concat());
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn transpose(d: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = d.first().map_or(0, Vec::len);
    (0..cols).map(|c| d.iter().map(|row| row[c]).collect()).collect()
}

fn dense_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut fwd, mut adj, mut pad, mut padt) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut n = 0;
    while n < 40 {
        let mode = PadMode::ALL[n % 4];
        let (m_t, n_t) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        let m_r = rng.gen_range(0..=4usize.min(m_t));
        let n_r = rng.gen_range(0..=6usize.min(n_t));
        if (m_t + 2 * m_r) * (n_t + 2 * n_r) > 4096 {
            continue;
        }
        n += 1;
        let stack = random_stack(&mut rng, m_t, n_t, m_r, n_r);
        let h = dense_h_oracle(&stack);
        let (m_p, n_p) = (stack.m_p(), stack.n_p());
        fwd = fwd.max(max_rel(&materialize_operator(|x| forward_h(&stack, x), m_p, n_p).unwrap().to_dense(), &h));
        adj = adj.max(max_rel(&materialize_operator(|r| adjoint_h(&stack, r), m_t, n_t).unwrap().to_dense(), &transpose(&h)));
        let p = dense_pad_oracle(m_t, n_t, m_r, n_r, mode);
        let op = make_pad_2d::<f64>(m_t, n_t, m_r, n_r, mode).unwrap();
        pad = pad.max(max_rel(&materialize_operator(|x| op.apply(x), m_t, n_t).unwrap().to_dense(), &p));
        padt = padt.max(max_rel(&materialize_operator(|r| op.apply_transpose(r), m_p, n_p).unwrap().to_dense(), &transpose(&p)));
    }
    let kron = verify::check_kronecker_padding(60, 203).map_err(|e| e.to_string())?;
    let ok = fwd <= 1e-13 && adj <= 1e-13 && pad == 0.0 && padt == 0.0 && kron.max_rel_err == 0.0;
    check(
        ok,
        format!(
            "40 instances: H {fwd:.1e}, Ht {adj:.1e} (tol 1e-13); P {pad:.1e}, Pt {padt:.1e}, Kronecker vs separable {:.1e} (exact)",
            kron.max_rel_err
        ),
    )
}

fn identity_suite() -> Outcome {
    let runs = [
        verify::check_shift_cumulation(50, 301),
        verify::check_circular_adjoint(50, 302),
        verify::check_dft_conjugate(50, 303),
        verify::check_valid_as_circular(50, 304),
        verify::check_full_as_circular(50, 305),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let r = r.map_err(|e| e.to_string())?;
        ok &= r.instances == 50 && r.max_rel_err <= 1e-11;
        parts.push(format!("{} {:.1e}", r.name, r.max_rel_err));
    }
    check(ok, format!("50 instances each (tol 1e-11): {}", parts.join(", ")))
}

fn complexity() -> Outcome {
    let cfg = TABLE_CONFIGS[0];
    let stack = make_stack::<f64>(&KernelParams::new(cfg.m_t, cfg.m_r, cfg.n_r), cfg.n_t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let xp = Image::random(stack.m_p(), stack.n_p(), &mut rng);
    let t0 = Instant::now();
    let (y, macs) = forward_h_counted(&stack, &xp).unwrap();
    let xt = adjoint_h(&stack, &y).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let expected = (stack.m_k() * stack.n_k() * cfg.m_t * cfg.n_t) as u64;
    let dense_bytes = (cfg.m_t * cfg.n_t) as f64 * (stack.m_p() * stack.n_p()) as f64 * 8.0;
    let hwm = peak_rss_bytes();
    let mem_ok = hwm.map_or(true, |b| (b as f64) < dense_bytes);
    check(
        macs == expected && secs < 10.0 && mem_ok && xt.is_finite(),
        format!(
            "TRF1 scale: {macs} multiply-adds (expected {expected}), forward+adjoint {secs:.2}s (limit 10s), peak RSS {} vs dense operator {:.1e} B",
            hwm.map_or("n/a".to_string(), |b| format!("{:.0} MiB", b as f64 / 1048576.0)),
            dense_bytes
        ),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let model = ForwardModel::new(random_stack(&mut rng, 16, 12, 2, 3), PadMode::Symmetric).unwrap();
    let x = Image::random(16, 12, &mut rng);
    let y = Image::random(16, 12, &mut rng);
    let f = |x: &Image<f64>| 0.5 * model.apply(x).unwrap().sub(&y).unwrap().norm_sq();
    let g = model.gradient_datafit(&x, &y).unwrap();
    let h = 1e-4;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let i = rng.gen_range(0..16);
        let j = rng.gen_range(0..12);
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[(i, j)] += h;
        xm[(i, j)] -= h;
        let fd = (f(&xp) - f(&xm)) / (2.0 * h);
        worst = worst.max((fd - g[(i, j)]).abs() / g[(i, j)].abs());
    }
    check(worst <= 1e-5, format!("20 coordinates, max relative error {worst:.2e} (tol 1e-5)"))
}

fn non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}

fn solver_behavior() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let model = ForwardModel::new(random_stack(&mut rng, 16, 12, 2, 3), PadMode::Symmetric).unwrap();
    let xs = Image::random(16, 12, &mut rng);
    let y = model.apply(&xs).unwrap();
    let cfg = SolverConfig { lambda1: 0.0, lambda2: 0.0, max_iters: 500, ..Default::default() };
    let rep = deconvolve(&model, &y, &cfg, None).unwrap();
    let ratio = rep.final_objective / rep.initial_objective;
    let mut monotone = non_increasing(&rep.objective_trace);

    let mut runs = 1;
    for (l1, l2) in [(2e-3, 1e-4), (0.05, 0.0), (0.0, 0.3), (0.5, 0.5)] {
        let noisy = add_awgn(&y, Snr::Db(20.0), runs).unwrap();
        let cfg = SolverConfig { lambda1: l1, lambda2: l2, max_iters: 200, ..Default::default() };
        monotone &= non_increasing(&deconvolve(&model, &noisy, &cfg, None).unwrap().objective_trace);
        runs += 1;
    }

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let v = Image::<f64>::random(8, 8, &mut rng).scaled(3.0);
        let (t, l1, l2) = (rng.gen_range(0.01..3.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let u = prox_elastic_net(&v, t, l1, l2).unwrap();
        for (&ui, &vi) in u.as_slice().iter().zip(v.as_slice()) {
            // v − u − tλ₂u must lie in tλ₁ ∂|u|
            let r = vi - ui - t * l2 * ui;
            let dist = if ui != 0.0 { (r - t * l1 * ui.signum()).abs() } else { (r.abs() - t * l1).max(0.0) };
            worst = worst.max(dist);
        }
    }
    check(
        ratio <= 1e-6 && monotone && worst <= 1e-10,
        format!(
            "least squares final/initial {ratio:.2e} after {} iterations (tol 1e-6); traces non-increasing in {runs} runs: {monotone}; prox inclusion residual {worst:.1e} (tol 1e-10)",
            rep.iterations_run
        ),
    )
}

fn av_vs_ai() -> Outcome {
    let t0 = Instant::now();
    let cfg = ExperimentConfig { rows: 256, cols: 128, m_r: 5, n_r: 12, ..Default::default() };
    let sim = cfg.simulate().unwrap();
    let av = cfg.deconvolve(sim.model.stack(), &sim.rf).unwrap();
    let ai_cfg = ExperimentConfig { invariant_kernel: Some(cfg.rows / 2), ..cfg.clone() };
    let ai = ai_cfg.deconvolve(sim.model.stack(), &sim.rf).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let (e_av, e_ai, e_raw) = (
        nrmse(&sim.trf, &av.x).unwrap(),
        nrmse(&sim.trf, &ai.x).unwrap(),
        nrmse(&sim.trf, &sim.rf).unwrap(),
    );
    check(
        e_av < e_ai && e_av < e_raw && secs < 120.0,
        format!("NRMSE AV {e_av:.4}, AI {e_ai:.4}, observation {e_raw:.4}; {secs:.1}s (limit 120s)"),
    )
}

fn snr_accuracy() -> Outcome {
    let model = ForwardModel::new(
        make_stack::<f64>(&KernelParams::new(400, 5, 12), 300).unwrap(),
        PadMode::Symmetric,
    )
    .unwrap();
    let trf = axialconv::phantom::make_trf(&TrfSpec::new(phantom_map(400, 300), 808)).unwrap();
    let clean = model.apply(&trf).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let y = model.simulate(&trf, Snr::Db(40.0), seed).unwrap();
        let realized = snr_db(&clean, &y.sub(&clean).unwrap());
        worst = worst.max((realized - 40.0).abs());
    }
    let inf = model.simulate(&trf, Snr::Infinite, 0).unwrap() == clean;
    check(
        worst <= 0.05 && inf && power(&clean) > 0.0,
        format!("120000 pixels, 5 seeds, max |SNR - 40 dB| = {worst:.2e} (tol 0.05); infinite SNR leaves signal unchanged: {inf}"),
    )
}

fn full_scale() -> Outcome {
    let limit = 4u64 << 30;
    let mut parts = Vec::new();
    let mut ok = true;
    for c in TABLE_CONFIGS {
        let t0 = Instant::now();
        let cfg = ExperimentConfig::for_table(c.name).unwrap();
        let sim = cfg.simulate().map_err(|e| e.to_string())?;
        let rep = cfg.deconvolve(sim.model.stack(), &sim.rf).map_err(|e| e.to_string())?;
        ok &= rep.iterations_run == 150 && rep.x.is_finite();
        parts.push(format!("{} {}x{} {:.0}s", c.name, c.m_t, c.n_t, t0.elapsed().as_secs_f64()));
    }
    let hwm = peak_rss_bytes();
    ok &= hwm.map_or(false, |b| b < limit);
    check(
        ok,
        format!(
            "simulate + 150 iterations: {}; peak RSS {} (limit 4 GiB)",
            parts.join(", "),
            hwm.map_or("unavailable".to_string(), |b| format!("{:.0} MiB", b as f64 / 1048576.0))
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("adjoint correctness", adjoint_correctness),
        ("dense-oracle equivalence", dense_equivalence),
        ("circular identity suite", identity_suite),
        ("multiply count and throughput", complexity),
        ("gradient check", gradient_check),
        ("solver behavior", solver_behavior),
        ("axially-variant vs invariant", av_vs_ai),
        ("SNR accuracy", snr_accuracy),
        ("full-scale configurations", full_scale),
    ];
    let mut failed = 0;
    let start = Instant::now();
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = Duration::from(t0.elapsed()).as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {}: PASS  {name}: {d} [{took:.1}s]", n + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {d} [{took:.1}s]", n + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
