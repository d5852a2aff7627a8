//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use hhot::analysis::{knn_loocv, LabeledMatrix};
use hhot::bench::{run_bench, BenchConfig};
use hhot::hierarchy::{
    centroid_matrix, dataset_distance, slide_cost_matrix, slide_distance, Dataset, DistanceMatrix, HierarchyConfig,
    MatrixMetadata, Slide,
};
use hhot::io::{
    parse_distance_matrix, read_distance_matrix, read_embedding_file, write_distance_matrix, write_embedding_file,
};
use hhot::ot::{
    entropic_ot, exact_ot_uniform, sinkhorn, sinkhorn_divergence, squared_euclidean_cost, CostMatrix, DiscreteMeasure,
    SolverConfig,
};
use hhot::Error;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tempfile::TempDir;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(r: &mut ChaCha8Rng, n: usize, m: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| r.random_range(lo..hi))
}

fn random_measure(r: &mut ChaCha8Rng, max_n: usize, dim: usize) -> DiscreteMeasure {
    let n = r.random_range(1..=max_n);
    let pts = random_matrix(r, n, dim, -1.5, 1.5);
    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    DiscreteMeasure::new(pts, w.iter().map(|v| v / s).collect()).unwrap()
}

/// Minimum of `sum_i C[i][perm[i]] / n` over all permutations (Heap's
/// algorithm).
fn enumerate_assignment(c: &Array2<f64>) -> f64 {
    let n = c.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum::<f64>();
    let mut best = cost(&perm);
    let mut stack = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            best = best.min(cost(&perm));
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

fn cfg(eps: f64) -> SolverConfig {
    SolverConfig::default().with_epsilon(eps)
}

fn oracle_equivalence() -> Check {
    let mut r = rng(1);
    let solver = SolverConfig {
        max_iterations: 20_000,
        ..cfg(1e-3)
    };
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = r.random_range(2..=6);
        let c = random_matrix(&mut r, n, n, 0.0, 10.0);
        let exact = enumerate_assignment(&c);
        let u = Array1::from_elem(n, 1.0 / n as f64);
        let s = sinkhorn(&CostMatrix::new(c).unwrap(), u.view(), u.view(), &solver).map_err(|e| e.to_string())?;
        let rel = (s.linear_cost - exact).abs() / exact;
        ensure(s.converged, || format!("case {case} (n = {n}) did not converge"))?;
        ensure(rel <= 0.01, || {
            format!("case {case}: sinkhorn {} vs exact {exact}", s.linear_cost)
        })?;
        worst = worst.max(rel);
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("worst relative gap {worst:.2e}, {secs:.3} s"))
}

fn divergence_axioms() -> Check {
    let mut r = rng(2);
    let c = SolverConfig::default();
    let (mut max_self, mut max_asym, mut min_sd, mut min_bias) = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    for case in 0..100 {
        let x = random_measure(&mut r, 8, 3);
        let y = random_measure(&mut r, 8, 3);
        let sd = |a: &DiscreteMeasure, b: &DiscreteMeasure| sinkhorn_divergence(a, b, &c).map(|t| t.value());
        let xx = sd(&x, &x).map_err(|e| e.to_string())?;
        let xy = sd(&x, &y).map_err(|e| e.to_string())?;
        let yx = sd(&y, &x).map_err(|e| e.to_string())?;
        let bias = entropic_ot(&x, &x, &c).map_err(|e| e.to_string())?.value().abs();
        ensure(xx.abs() <= 1e-8, || format!("case {case}: sd(X,X) = {xx}"))?;
        ensure((xy - yx).abs() <= 1e-8, || format!("case {case}: {xy} vs {yx}"))?;
        ensure(xy >= -1e-8, || format!("case {case}: sd(X,Y) = {xy}"))?;
        ensure(bias > 0.0, || format!("case {case}: raw OT(X,X) = 0"))?;
        max_self = max_self.max(xx.abs());
        max_asym = max_asym.max((xy - yx).abs());
        min_sd = min_sd.min(xy);
        min_bias = min_bias.min(bias);
    }
    Ok(format!(
        "max |sd(X,X)| {max_self:.1e}, max asymmetry {max_asym:.1e}, min sd {min_sd:.3e}, min |raw OT(X,X)| {min_bias:.3e}"
    ))
}

fn metric_sanity() -> Check {
    let mut r = rng(3);
    let clouds: Vec<Array2<f64>> = (0..20).map(|_| random_matrix(&mut r, 3, 2, -2.0, 2.0)).collect();
    let mut w = Array2::<f64>::zeros((20, 20));
    for i in 0..20 {
        for j in 0..20 {
            let c = squared_euclidean_cost(clouds[i].view(), clouds[j].view()).unwrap();
            let lib = exact_ot_uniform(&c).map_err(|e| e.to_string())?.linear_cost;
            let oracle = enumerate_assignment(&c.view().to_owned());
            ensure((lib - oracle).abs() <= 1e-12 * (1.0 + oracle), || {
                format!("exact solver {lib} vs enumeration {oracle}")
            })?;
            w[[i, j]] = oracle.sqrt();
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut triples = 0;
    for i in 0..20 {
        for j in 0..20 {
            for k in 0..20 {
                let slack = w[[i, k]] - w[[i, j]] - w[[j, k]];
                if i != j && j != k && i != k {
                    worst = worst.max(slack);
                }
                triples += 1;
                ensure(slack <= 1e-9, || {
                    format!("W({i},{k}) exceeds W({i},{j}) + W({j},{k}) by {slack}")
                })?;
            }
        }
    }
    Ok(format!(
        "{triples} triples, largest W(i,k) - W(i,j) - W(j,k) over distinct points = {worst:.3e}"
    ))
}

fn hierarchy_collapse() -> Check {
    let mut r = rng(4);
    let h = HierarchyConfig::default();
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let a = random_measure(&mut r, 6, 3);
        let b = random_measure(&mut r, 6, 3);
        let sa = Slide::new("a", None, a.points().to_owned(), a.weights().to_owned()).unwrap();
        let sb = Slide::new("b", None, b.points().to_owned(), b.weights().to_owned()).unwrap();
        let slide = slide_distance(&sa, &sb, &h.inner()).map_err(|e| e.to_string())?.value();
        let da = Dataset::uniform("A", vec![sa]).unwrap();
        let db = Dataset::uniform("B", vec![sb]).unwrap();
        let data = dataset_distance(&da, &db, &h).map_err(|e| e.to_string())?.value();
        ensure((data - slide).abs() <= 1e-9, || {
            format!("case {case}: dataset {data} vs slide {slide}")
        })?;
        worst = worst.max((data - slide).abs());

        // One tile per slide: slide distance is the ground cost, and the
        // dataset distance is the divergence between the tile points.
        let x = a.points().to_owned();
        let y = b.points().to_owned();
        let one = |id: String, row: ndarray::ArrayView1<f64>| {
            Slide::uniform(id, None, row.to_owned().insert_axis(ndarray::Axis(0))).unwrap()
        };
        let s0 = one("x0".into(), x.row(0));
        let t0 = one("y0".into(), y.row(0));
        let ground: f64 = x.row(0).iter().zip(y.row(0)).map(|(p, q)| (p - q) * (p - q)).sum();
        let d = slide_distance(&s0, &t0, &h.inner()).map_err(|e| e.to_string())?.value();
        ensure((d - ground).abs() <= 1e-9, || {
            format!("case {case}: one-tile slides {d} vs {ground}")
        })?;
        worst = worst.max((d - ground).abs());

        let sx: Vec<Slide> = x
            .outer_iter()
            .enumerate()
            .map(|(i, p)| one(format!("x{i}"), p))
            .collect();
        let sy: Vec<Slide> = y
            .outer_iter()
            .enumerate()
            .map(|(i, p)| one(format!("y{i}"), p))
            .collect();
        let dx = Dataset::new("X", sx, a.weights().to_owned()).unwrap();
        let dy = Dataset::new("Y", sy, b.weights().to_owned()).unwrap();
        let nested = dataset_distance(&dx, &dy, &h).map_err(|e| e.to_string())?.value();
        let flat = sinkhorn_divergence(&a, &b, &h.outer())
            .map_err(|e| e.to_string())?
            .value();
        ensure((nested - flat).abs() <= 1e-9, || {
            format!("case {case}: one-tile datasets {nested} vs {flat}")
        })?;
        worst = worst.max((nested - flat).abs());
    }
    Ok(format!("largest deviation {worst:.2e}"))
}

fn hhot() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hhot"));
    for (k, _) in std::env::vars() {
        if k.starts_with("HHOT_") {
            c.env_remove(k);
        }
    }
    c
}

fn run_ok(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "hhot exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write_manifest(dir: &Path, d: &Dataset) -> PathBuf {
    let slides: Vec<serde_json::Value> = d
        .slides()
        .iter()
        .map(|s| {
            let file = format!("{}.bin", s.id);
            write_embedding_file(dir.join(&file), &s.tiles().to_owned()).unwrap();
            let mut e = serde_json::json!({"id": s.id, "path": file});
            if let Some(l) = &s.label {
                e["label"] = serde_json::json!(l);
            }
            e
        })
        .collect();
    let path = dir.join(format!("{}.json", d.name));
    fs::write(&path, serde_json::json!({"name": d.name, "slides": slides}).to_string()).unwrap();
    path
}

fn determinism() -> Check {
    let d = hhot::synth::separated_classes(3, 4, 30, 8, 2.0, Default::default(), 5).unwrap();
    let c = SolverConfig::default();
    let on = |w: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap();
        pool.install(|| {
            let m = slide_cost_matrix(&d, &d, &c).unwrap();
            let v = dataset_distance(&d, &d, &HierarchyConfig::default()).unwrap().value();
            (m.entries.mapv(f64::to_bits), v.to_bits())
        })
    };
    let one = on(1);
    for w in [2, 4, 8] {
        ensure(on(w) == one, || {
            format!("library results differ between 1 and {w} workers")
        })?;
    }

    let t = TempDir::new().map_err(|e| e.to_string())?;
    let manifest = write_manifest(t.path(), &d);
    let cache = t.path().join("cache");
    let runs: [(&str, Vec<&str>); 5] = [
        ("w1", vec!["--workers", "1"]),
        ("w4", vec!["--workers", "4"]),
        ("cold", vec!["--cache"]),
        ("warm", vec!["--cache"]),
        ("warm-w3", vec!["--workers", "3", "--cache"]),
    ];
    let mut outputs = Vec::new();
    for (name, flags) in &runs {
        let out = t.path().join(format!("{name}.csv"));
        let mut cmd = hhot();
        cmd.arg("matrix").arg(&manifest).args(flags);
        if flags.last() == Some(&"--cache") {
            cmd.arg(&cache);
        }
        run_ok(cmd.arg("--out").arg(&out))?;
        outputs.push((name, fs::read(&out).map_err(|e| e.to_string())?));
    }
    for (name, bytes) in &outputs[1..] {
        ensure(*bytes == outputs[0].1, || {
            format!("matrix file from run `{name}` differs from `w1`")
        })?;
    }
    let entries = fs::read_dir(&cache).map_err(|e| e.to_string())?.count();
    ensure(entries > 0, || "cache directory is empty".into())?;
    Ok(format!(
        "1/2/4/8 workers bit-identical; {} CLI runs byte-identical; {entries} cache entries",
        outputs.len()
    ))
}

fn benchmark_direction() -> Check {
    let sizes = vec![4, 6, 9, 12, 15, 18];
    let cfg = BenchConfig {
        n_slides: sizes.clone(),
        tiles_per_slide: 100,
        dim: 64,
        repeats: 3,
        workers: rayon::current_num_threads(),
        ..BenchConfig::default()
    };
    let t0 = Instant::now();
    let rows = run_bench(&cfg).map_err(|e| e.to_string())?;
    let total = t0.elapsed().as_secs_f64();
    let mut t_flat = Vec::new();
    let mut table = Vec::new();
    for r in &rows {
        let f = r
            .t_flat
            .ok_or_else(|| format!("flat solve at n = {}: {}", r.n_slides, r.flat_status))?;
        t_flat.push(f);
        table.push(format!("n={} hier {:.2}s flat {:.2}s", r.n_slides, r.t_hier, f));
    }
    let at = |n: usize| sizes.iter().position(|&s| s == n).unwrap();
    let last = &rows[at(18)];
    ensure(last.t_hier < t_flat[at(18)], || format!("n = 18: {}", table.join("; ")))?;
    let ratio = t_flat[at(18)] / t_flat[at(9)];
    ensure(ratio > 2.0, || {
        format!("t_flat(18)/t_flat(9) = {ratio:.2}; {}", table.join("; "))
    })?;
    // Least-squares slope of log t_flat against log n.
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = t_flat.iter().map(|t| t.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 6.0, ys.iter().sum::<f64>() / 6.0);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    ensure(slope > 1.0, || format!("log-log slope of t_flat = {slope:.2}"))?;
    ensure(total < 600.0, || format!("benchmark took {total:.0} s"))?;
    Ok(format!(
        "{}; t_flat(18)/t_flat(9) = {ratio:.2}, log-log slope {slope:.2}, {total:.0} s total, {} worker(s)",
        table.join("; "),
        cfg.workers
    ))
}

fn knn_accuracy(m: DistanceMatrix, labels: Vec<String>, k: usize) -> Result<f64, String> {
    let lm = LabeledMatrix::new(m, labels).map_err(|e| e.to_string())?;
    Ok(knn_loocv(&lm, k).map_err(|e| e.to_string())?.accuracy)
}

fn equal_centroid_knn() -> Check {
    let mut margin = f64::INFINITY;
    let (mut hhot_min, mut centroid_max) = (f64::INFINITY, 0.0f64);
    let mut unconverged = 0;
    for seed in 0..5 {
        let d = hhot::synth::equal_centroid_classes(6, 5, 50, 16, 2.0, 0.5, seed).unwrap();
        let labels: Vec<String> = d.slides().iter().map(|s| s.label.clone().unwrap()).collect();
        let h = slide_cost_matrix(&d, &d, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let c = centroid_matrix(&d, &d).map_err(|e| e.to_string())?;
        unconverged += h.metadata.unconverged;
        for k in 2..=8 {
            let ah = knn_accuracy(h.clone(), labels.clone(), k)?;
            let ac = knn_accuracy(c.clone(), labels.clone(), k)?;
            ensure(ah - ac >= 0.2, || {
                format!("seed {seed}, k = {k}: hhot {ah:.3} vs centroid {ac:.3}")
            })?;
            margin = margin.min(ah - ac);
            hhot_min = hhot_min.min(ah);
            centroid_max = centroid_max.max(ac);
        }
    }
    Ok(format!(
        "min hhot accuracy {hhot_min:.3}, max centroid accuracy {centroid_max:.3}, min margin {margin:.3}, \
         {unconverged} of {} slide pairs hit the iteration cap",
        5 * 30 * 30
    ))
}

fn write_records(path: &Path, rows: &[(String, String, f64, f64, f64)]) {
    let mut text = String::from("source,target,auc_transfer,auc_base,distance\n");
    for (s, t, at, ab, d) in rows {
        text.push_str(&format!("{s},{t},{at},{ab},{d}\n"));
    }
    fs::write(path, text).unwrap();
}

fn transfer_groups(records: &Path, out: &Path, pooled: bool) -> Result<Vec<serde_json::Value>, String> {
    let mut cmd = hhot();
    cmd.arg("transfer").arg(records).arg("--out").arg(out);
    if pooled {
        cmd.arg("--pooled");
    }
    run_ok(&mut cmd)?;
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    v["groups"]
        .as_array()
        .cloned()
        .ok_or_else(|| "report has no groups".to_string())
}

fn transfer_pipeline() -> Check {
    let t = TempDir::new().map_err(|e| e.to_string())?;
    let mut r = rng(8);
    let noise = Normal::new(0.0, 0.005).unwrap();
    let mut planted = Vec::new();
    let mut constant = Vec::new();
    for target in ["t0", "t1", "t2"] {
        for s in 0..20 {
            let d: f64 = r.random_range(0.5..5.0);
            let base: f64 = r.random_range(0.55..0.75);
            let tr = 0.3 - 0.05 * d + noise.sample(&mut r);
            planted.push((format!("s{s}"), target.to_string(), base * (1.0 + tr), base, d));
            constant.push((format!("s{s}"), target.to_string(), base * 1.02, base, d));
        }
    }
    let rec = t.path().join("planted.csv");
    write_records(&rec, &planted);
    let out = t.path().join("report.json");
    let mut groups = transfer_groups(&rec, &out, false)?;
    groups.extend(transfer_groups(&rec, &out, true)?);
    ensure(groups.len() == 4, || format!("expected 4 groups, got {}", groups.len()))?;
    let mut worst_slope: f64 = 0.0;
    let mut worst_r = f64::NEG_INFINITY;
    for g in &groups {
        let slope = g["slope"].as_f64().ok_or("missing slope")?;
        let rr = g["r"].as_f64().ok_or("missing r")?;
        let dev = (slope + 0.05).abs() / 0.05;
        ensure(dev <= 0.1, || format!("group {}: slope {slope}", g["group"]))?;
        ensure(rr < -0.9, || format!("group {}: r {rr}", g["group"]))?;
        worst_slope = worst_slope.max(dev);
        worst_r = worst_r.max(rr);
    }

    let rec = t.path().join("constant.csv");
    write_records(&rec, &constant);
    let mut flat = transfer_groups(&rec, &out, false)?;
    flat.extend(transfer_groups(&rec, &out, true)?);
    let mut worst_flat: f64 = 0.0;
    for g in &flat {
        let slope = g["slope"].as_f64().ok_or("missing slope")?;
        ensure(slope.abs() <= 1e-12, || {
            format!("constant input, group {}: slope {slope}", g["group"])
        })?;
        worst_flat = worst_flat.max(slope.abs());
    }
    Ok(format!(
        "slope within {:.1}% of -0.05, max r {worst_r:.4}; constant input max |slope| {worst_flat:.1e}",
        100.0 * worst_slope
    ))
}

fn expect_error(res: hhot::Result<impl Sized>, what: &str, want: fn(&Error) -> bool) -> Result<(), String> {
    match res {
        Ok(_) => Err(format!("{what}: accepted")),
        Err(e) if want(&e) => Ok(()),
        Err(e) => Err(format!("{what}: wrong error class: {e}")),
    }
}

fn format_fidelity() -> Check {
    let t = TempDir::new().map_err(|e| e.to_string())?;
    let mut r = rng(9);

    let values = Array2::from_shape_fn((37, 13), |_| r.random_range(-100.0..100.0f32) as f64);
    let bin = t.path().join("e.bin");
    write_embedding_file(&bin, &values).map_err(|e| e.to_string())?;
    let back = read_embedding_file(&bin).map_err(|e| e.to_string())?.values;
    ensure(back.mapv(f64::to_bits) == values.mapv(f64::to_bits), || {
        "binary embedding changed".into()
    })?;

    let text = Array2::from_shape_fn((9, 5), |_| r.random_range(-1e3..1e3));
    let csv = t.path().join("e.csv");
    write_embedding_file(&csv, &text).map_err(|e| e.to_string())?;
    let back = read_embedding_file(&csv).map_err(|e| e.to_string())?.values;
    ensure(back.mapv(f64::to_bits) == text.mapv(f64::to_bits), || {
        "CSV embedding changed".into()
    })?;

    let n = 7;
    let mut e = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = r.random_range(0.0..50.0);
            e[[i, j]] = v;
            e[[j, i]] = v;
        }
    }
    e[[0, 1]] = 1e-300;
    e[[1, 0]] = 1e-300;
    let ids: Vec<String> = (0..n).map(|i| format!("slide-{i}")).collect();
    let md = MatrixMetadata {
        epsilon_inner: Some(0.1 + 0.2),
        epsilon_outer: Some(0.25),
        debiased: true,
        metric: "hhot".into(),
        subsample: Some(64),
        seed: Some(u64::MAX),
        ..MatrixMetadata::default()
    };
    let m = DistanceMatrix::new(ids.clone(), ids, e, md).map_err(|e| e.to_string())?;
    let path = t.path().join("m.csv");
    write_distance_matrix(&m, &path).map_err(|e| e.to_string())?;
    let back = read_distance_matrix(&path).map_err(|e| e.to_string())?;
    ensure(back.entries.mapv(f64::to_bits) == m.entries.mapv(f64::to_bits), || {
        "matrix entries changed".into()
    })?;
    ensure(back.row_ids == m.row_ids && back.col_ids == m.col_ids, || {
        "matrix ids changed".into()
    })?;
    ensure(back.metadata == m.metadata, || {
        format!("{:?} vs {:?}", back.metadata, m.metadata)
    })?;

    let good = fs::read(&bin).map_err(|e| e.to_string())?;
    let is_format = |e: &Error| matches!(e, Error::Format { .. });
    let bad = |name: &str, bytes: &[u8]| {
        let p = t.path().join(name);
        fs::write(&p, bytes).unwrap();
        read_embedding_file(&p)
    };
    let mut magic = good.clone();
    magic[0] = b'X';
    expect_error(bad("magic.bin", &magic), "bad magic", is_format)?;
    let mut version = good.clone();
    version[4] = 99;
    expect_error(bad("version.bin", &version), "unknown version", is_format)?;
    expect_error(bad("short.bin", &good[..10]), "truncated header", is_format)?;
    expect_error(
        bad("payload.bin", &good[..good.len() - 4]),
        "truncated payload",
        is_format,
    )?;
    let mut long = good.clone();
    long.extend_from_slice(&[0, 0, 0, 0]);
    expect_error(bad("long.bin", &long), "trailing bytes", is_format)?;

    let is_schema = |e: &Error| matches!(e, Error::Schema { .. });
    let good_text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let p = Path::new("m.csv");
    let cases = [
        ("missing metric", good_text.replace("# metric=hhot\n", "")),
        ("missing debiased", good_text.replace("# debiased=true\n", "")),
        ("not key=value", good_text.replacen("# ", "# garbage\n# ", 1)),
        (
            "duplicate key",
            good_text.replacen("# metric=hhot\n", "# metric=hhot\n# metric=flat\n", 1),
        ),
        ("bad column header", good_text.replacen("id,", "name,", 1)),
        ("row count", good_text.replace("# rows=7", "# rows=8")),
    ];
    for (what, text) in &cases {
        ensure(text != &good_text, || {
            format!("{what}: fixture did not change the file")
        })?;
        expect_error(parse_distance_matrix(p, text), what, is_schema)?;
    }
    Ok(format!(
        "embeddings (bin, csv) and matrix exact; {} malformed inputs rejected",
        5 + cases.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("divergence axioms", divergence_axioms),
        ("metric sanity", metric_sanity),
        ("hierarchy collapse", hierarchy_collapse),
        ("determinism and parallel equivalence", determinism),
        ("hierarchical beats flat runtime", benchmark_direction),
        ("equal-centroid KNN", equal_centroid_knn),
        ("transferability pipeline", transfer_pipeline),
        ("format fidelity", format_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {} {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
