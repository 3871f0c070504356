use rsgd::analysis::generalization_gap;
use rsgd::harness::{
    compare, compare_csv, parse_compare_csv, persist, prepare, run, stability_report, sweep, RunConfig, RunLog,
    LOG_COLUMNS, LOG_FILE,
};

fn cfg(text: &str) -> RunConfig {
    RunConfig::parse(text).unwrap()
}

#[test]
fn full_batch_quadratic_gap_decays_geometrically() {
    let c = cfg("problem=quadratic\ndata=gauss:50:4:3\nopt=sgd\nlr=0.1\nbatch=full\nsampling=inorder\nsteps=60\neval_every=1\ninit=const:2\n");
    let p = prepare(&c).unwrap();
    let x_star = p.problem.quadratic_minimizer(&p.train).unwrap();
    let r_star = p.problem.empirical_risk(&x_star, &p.train).unwrap();
    let log = run(&c).unwrap();
    let gap0 = log.records[0].train_loss - r_star;
    for rec in &log.records {
        let expected = gap0 * 0.9f64.powi(2 * rec.step as i32);
        let got = rec.train_loss - r_star;
        assert!(
            (got - expected).abs() <= 1e-9 * gap0,
            "step {}: {got} vs {expected}",
            rec.step
        );
    }
}

#[test]
fn residual_wrapper_at_alpha_one_reproduces_sgd_log() {
    let base =
        "problem=logistic\ndata=blobs:2:60:3:1.0\nheldout=blobs:2:40:3:1.0\nlr=0.2\nsteps=300\neval_every=30\nseed=9\n";
    let a = run(&cfg(&format!("{base}opt=sgd\n"))).unwrap();
    let b = run(&cfg(&format!("{base}opt=rsgd\nscheme=scale:1\n"))).unwrap();
    assert_eq!(a.final_params, b.final_params);
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.train_loss, y.train_loss);
        assert_eq!(x.heldout_acc, y.heldout_acc);
        assert_eq!(y.proximity_mean.unwrap_or(0.0), 0.0);
    }
}

#[test]
fn compare_emits_one_row_per_step_run_and_metric() {
    let base = "problem=quadratic\ndata=gauss:40:3:3\nlr=0.05\nsteps=100\neval_every=20\n";
    let logs = vec![
        run(&cfg(&format!("{base}name=a\nopt=sgd\n"))).unwrap(),
        run(&cfg(&format!("{base}name=b\nopt=rsgd\nscheme=topk:0.5\n"))).unwrap(),
    ];
    let rows = compare(&logs).unwrap();
    let steps = logs[0].records.len();
    let metrics: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
    assert!(metrics.len() < LOG_COLUMNS.len());
    let per_run = |id: &str| rows.iter().filter(|r| r.run_id == id).count();
    assert_eq!(per_run(&logs[0].run_id) % steps, 0);
    assert!(per_run(&logs[1].run_id) > per_run(&logs[0].run_id));
    let csv = compare_csv(&rows);
    assert!(csv.starts_with("step,run_id,metric,value\n"));
    assert_eq!(parse_compare_csv(&csv).unwrap(), rows);
}

#[test]
fn compare_rejects_mismatched_cadence() {
    let base = "problem=quadratic\ndata=gauss:40:3:3\nlr=0.05\nsteps=100\nopt=sgd\n";
    let a = run(&cfg(&format!("{base}eval_every=20\n"))).unwrap();
    let b = run(&cfg(&format!("{base}eval_every=25\n"))).unwrap();
    assert!(compare(&[a, b]).is_err());
}

#[test]
fn persisted_log_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(
        "name=rt\nproblem=mlp:4\ndata=blobs:2:20:3:1.0\nopt=rsgdm\nscheme=sign\nlr=0.05\nsteps=50\neval_every=10\n",
    );
    let log = run(&c).unwrap();
    let path = persist(&log, dir.path()).unwrap();
    let back = RunLog::read(path.join(LOG_FILE)).unwrap();
    assert_eq!(back.to_text(), log.to_text());
    assert_eq!(back.steps(), vec![0, 10, 20, 30, 40, 50]);
}

#[test]
fn sweep_is_independent_of_config_order() {
    let a = cfg("name=a\nproblem=quadratic\ndata=gauss:30:2:3\nopt=sgd\nlr=0.1\nsteps=40\n");
    let b = cfg("name=b\nproblem=quadratic\ndata=gauss:30:2:3\nopt=rsgd\nscheme=scale:0.5\nlr=0.1\nsteps=40\n");
    let fwd = sweep(&[a.clone(), b.clone()], 3, 2, None).unwrap();
    let rev = sweep(&[b, a], 3, 2, None).unwrap();
    assert_eq!(fwd.configs[0], rev.configs[1]);
    assert_eq!(fwd.configs[1], rev.configs[0]);
}

#[test]
fn sweep_records_diverging_replicas() {
    let c = cfg("name=boom\nproblem=quadratic\ndata=gauss:30:2:3\nopt=sgd\nlr=5\nsteps=2000\n");
    let s = sweep(&[c], 2, 3, None).unwrap();
    assert!(s.has_failures());
    assert!(s.to_csv().contains("# failed boom replica 0"));
}

// Averaged over dataset draws, the measured gap stays under the convex
// stability bound plus three standard errors.
#[test]
fn generalization_gap_within_convex_stability_bound() {
    let base = "problem=logistic\nweight_decay=0.01\ndata=blobs:2:60:5:1.6\nheldout=blobs:2:2000:5:1.6\n\
                opt=rsgd\nscheme=scale:0.25\nsteps=400\neval_every=400\npairs=8\n";
    let probe = cfg(&format!("{base}lr=0.1\n"));
    let p = prepare(&probe).unwrap();
    let lr = 1.0 / p.problem.smoothness_bound(&p.train).unwrap();
    let bound_cfg = cfg(&format!("{base}lr={lr}\n"));
    let report = stability_report(&bound_cfg).unwrap();
    let bound = report.bounds.unwrap().last().unwrap().bound;

    let gaps: Vec<f64> = (0..20)
        .map(|draw| {
            let c = cfg(&format!("{base}lr={lr}\ndata_seed={}\nseed={draw}\n", 100 + draw));
            let log = run(&c).unwrap();
            let p = prepare(&c).unwrap();
            generalization_gap(&p.problem, &log.final_params, &p.train, p.heldout.as_ref().unwrap())
                .unwrap()
                .abs()
        })
        .collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (n - 1.0);
    assert!(mean <= bound + 3.0 * (var / n).sqrt(), "gap {mean} vs bound {bound}");
}
