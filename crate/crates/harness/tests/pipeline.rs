use std::fs;
use std::path::Path;

use copflm::commands::{evaluate, Methods, COP_LRT, COP_SCORE, IND_SCORE, UNI_SCORE};
use copflm::io::load_dataset;
use copflm::{run_power, run_simulate, run_test, run_test_on, run_type1, RunConfig, RunReport};
use copflm_core::basis::smooth_gvf;
use copflm_core::inference::SurvivalData;
use copflm_core::{build_design, eval_basis, FlmMode};

fn config(dir: &Path, extra: &str) -> RunConfig {
    let out = dir.display();
    RunConfig::from_toml(&format!(
        r#"
        seed = 5
        out = "{out}"
        threads = 1
        [data]
        phenotype = "{out}/phenotype.tsv"
        genotype = "{out}/genotype.tsv"
        regions = "{out}/regions.tsv"
        {extra}
        "#
    ))
    .unwrap()
}

fn without_wall_time(report: &RunReport) -> Vec<String> {
    let text = report.rows_tsv();
    let wall = text.lines().next().unwrap().split('\t').position(|h| h == "wall_ms").unwrap();
    text.lines()
        .map(|line| {
            let mut cells: Vec<&str> = line.split('\t').collect();
            cells.remove(wall);
            cells.join("\t")
        })
        .collect()
}

#[test]
fn simulated_null_regions_give_valid_p_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
        [simulation]
        n = 300
        taus = [0.4]
        genotype_sets = 20
        causal_fraction = 0.0
        effect_c = 0.0
        "#,
    );
    run_simulate(&cfg).unwrap();
    for name in ["phenotype.tsv", "genotype.tsv", "regions.tsv", "truth.tsv"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let report = run_test(&cfg).unwrap();
    for method in [COP_SCORE, COP_LRT] {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.method == method).collect();
        assert_eq!(rows.len(), 20, "{method}");
        for r in rows {
            assert!(r.converged, "{}: {}", r.unit, r.note);
            assert!(r.p_value > 0.0 && r.p_value <= 1.0, "{} p = {}", r.unit, r.p_value);
            assert_eq!(r.df, 5);
        }
    }
    for g in 0..20 {
        let curve = fs::read_to_string(dir.path().join(format!("gamma_curve_sim{g}_B5.tsv"))).unwrap();
        assert_eq!(curve.lines().count(), 201);
    }
    let (rows, summary) = report.write(dir.path()).unwrap();
    assert!(fs::read_to_string(rows).unwrap().lines().skip(1).all(|l| l.starts_with(&cfg.hash())));
    assert!(fs::read_to_string(summary).unwrap().lines().count() > 1);
}

#[test]
fn gamma_curve_integrates_to_design_contribution() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(
        dir.path(),
        r#"
        [model]
        flm_mode = "both"
        [simulation]
        n = 300
        taus = [0.4]
        genotype_sets = 1
        causal_fraction = 0.3
        effect_c = 0.8
        "#,
    );
    cfg.data.min_variants = 2;
    run_simulate(&cfg).unwrap();
    let (p, g, r) = cfg.data_paths().unwrap();
    let ds = load_dataset(p, g, r, cfg.data.window).unwrap();
    run_test_on(&cfg, &ds).unwrap();

    let spec = cfg.model_spec(5).unwrap();
    let FlmMode::SmoothBoth { gvf, gef } = spec.flm_mode else {
        panic!("expected the two-basis mode");
    };
    let records = ds.region_records(0);
    let region = &ds.regions[0].region;
    let design = build_design(&records, region, &spec).unwrap();
    let data = SurvivalData::new(&records, &design).unwrap();
    let methods = Methods { lrt: true, independence: false, univariate: false };
    let (_, full) = evaluate(&spec, &data, &cfg.optimizer(), methods, &None, "sim0");
    let gamma = full.expect("unrestricted fit").params.gamma;
    assert!(gamma.iter().any(|g| g.abs() > 1e-3));

    let text = fs::read_to_string(dir.path().join("gamma_curve_sim0_B5.tsv")).unwrap();
    let curve: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (u, v) = l.split_once('\t').unwrap();
            (u.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(curve.len(), 200);
    let grid: Vec<f64> = curve.iter().map(|c| c.0).collect();
    let psi = eval_basis(&gef, &grid).unwrap().values;
    for (k, &(_, value)) in curve.iter().enumerate() {
        let direct: f64 = (0..5).map(|b| psi[(k, b)] * gamma[b]).sum();
        assert!((value - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    let phi = eval_basis(&gvf, &grid).unwrap().values;
    let positions = region.standardized_positions();
    let h = grid[1] - grid[0];
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (i, rec) in records.iter().enumerate() {
        let coef = smooth_gvf(&rec.genotypes, &positions, &gvf).unwrap();
        let integrand: Vec<f64> = (0..grid.len())
            .map(|k| (0..coef.len()).map(|a| coef[a] * phi[(k, a)]).sum::<f64>() * curve[k].1)
            .collect();
        let trapezoid = h * (integrand.iter().sum::<f64>() - 0.5 * (integrand[0] + integrand[grid.len() - 1]));
        let exact: f64 = design.rows.row(i).iter().zip(&gamma).map(|(m, g)| m * g).sum();
        worst = worst.max((trapezoid - exact).abs());
        scale = scale.max(exact.abs());
    }
    assert!(worst <= 1e-3 * scale, "worst {worst}, scale {scale}");
}

#[test]
fn type1_reports_reproduce_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
        [simulation]
        n = 200
        taus = [0.05, 0.8]
        genotype_sets = 2
        phenotype_sets = 3
        "#,
    );
    let first = run_type1(&cfg).unwrap();
    let second = run_type1(&cfg).unwrap();
    assert_eq!(without_wall_time(&first), without_wall_time(&second));
    assert_eq!(first.summary_tsv(), second.summary_tsv());
    assert_eq!(first.rows.len(), 2 * 2 * 3 * 3);
    for method in [COP_SCORE, COP_LRT, IND_SCORE] {
        let s = first.rate(|c| c.tau == 0.8, method, 0.05).unwrap();
        assert_eq!(s.replicates + s.excluded, 6, "{method}");
        assert_eq!(first.rate(|c| c.causal_fraction == 0.0, method, 0.05).unwrap().n_basis, 5);
    }

    let mut other = cfg.clone();
    other.seed = 6;
    let third = run_type1(&other).unwrap();
    assert_ne!(without_wall_time(&first)[1..], without_wall_time(&third)[1..]);
    assert_ne!(cfg.hash(), {
        let mut c = cfg.clone();
        c.simulation.n = 201;
        c.hash()
    });
}

#[test]
fn power_run_covers_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
        [simulation]
        n = 200
        taus = [0.8]
        genotype_sets = 2
        phenotype_sets = 2
        [test]
        lrt = false
        [power]
        effects = [{ causal_fraction = 0.2, effect_c = 0.4 }]
        ns = [150, 200]
        "#,
    );
    let report = run_power(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2 * 2 * 2 * 2 * 2);
    for sign in ["homogeneous", "alternating"] {
        for n in [150, 200] {
            for method in [COP_SCORE, UNI_SCORE] {
                let s = report.rate(|c| c.sign == sign && c.n == n, method, 0.05).unwrap();
                assert_eq!(s.replicates + s.excluded, 4);
            }
        }
    }
    assert!(report.rows.iter().all(|r| r.method != COP_LRT));
    report.check_convergence(cfg.test.max_nonconvergence).unwrap();
}

#[test]
fn power_rejects_cells_without_causal_variants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        r#"
        [simulation]
        m = 4
        [power]
        effects = [{ causal_fraction = 0.05, effect_c = 0.4 }]
        "#,
    );
    assert!(run_power(&cfg).is_err());
}
