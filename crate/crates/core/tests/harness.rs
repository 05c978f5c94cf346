mod common;

use common::{pm1_design, rng};
use l0est::config::{Config, DesignSpec};
use l0est::design::SparseParam;
use l0est::harness::{self, NoiseModel};

fn config(json: &str) -> Config {
    Config::from_json(json).unwrap()
}

fn small_lse(sigma: f64, c_r: f64, replicates: usize) -> Config {
    config(&format!(
        r#"{{
        "n": 40, "p": 6, "spt_size": 1, "replicates": {replicates}, "seed": 17,
        "design": {{"kind": "low_coherence_pm1", "target_mu": 0.3}},
        "model": {{"kind": "lse", "link": {{"kind": "linear", "a": 1.0, "b": 0.0}},
                  "noise": {{"kind": "gaussian_iid", "sigma": {sigma}}}}},
        "interval": {{"lo": -3, "hi": 3}},
        "theorem": {{"kind": "one_disc", "theta": 0.5}},
        "c_r": {c_r}
    }}"#
    ))
}

#[test]
fn empty_truth_gives_zero_beta() {
    let cfg = config(
        r#"{"n": 30, "p": 5, "spt_size": 0, "seed": 2,
            "model": {"kind": "glm", "family": {"kind": "bernoulli"}},
            "interval": {"lo": -2, "hi": 2}, "max_support": 2, "theorem": {"kind": "glm"}}"#,
    );
    for r in 0..5 {
        let (x, beta, y) = harness::generate_instance(&cfg, r).unwrap();
        assert!(beta.is_zero());
        assert_eq!(y.len(), x.n());
        assert!(y.iter().all(|v| *v == 0.0 || *v == 1.0));
    }
}

#[test]
fn instances_depend_only_on_seed_and_replicate() {
    let cfg = small_lse(0.5, 0.1, 1);
    let a = harness::generate_instance(&cfg, 3).unwrap();
    let b = harness::generate_instance(&cfg, 3).unwrap();
    let c = harness::generate_instance(&cfg, 4).unwrap();
    assert!(a.1.bit_eq(&b.1) && a.2 == b.2);
    assert!(a.2 != c.2);
    assert_eq!(a.1.support_size(), 1);
}

#[test]
fn symmetric_flip_channel_erases_the_signal() {
    let p = 0.3;
    let cfg = config(&format!(
        r#"{{"n": 100, "p": 8, "spt_size": 2, "seed": 9,
            "design": {{"kind": "low_coherence_pm1", "target_mu": 0.3}},
            "model": {{"kind": "lse", "link": {{"kind": "logistic_flip", "p01": {p}, "p11": {p}}},
                      "noise": {{"kind": "flip_channel", "p01": {p}, "p11": {p}}}}},
            "interval": {{"lo": -2, "hi": 2}},
            "theorem": {{"kind": "ub_strip", "rho1": 1.0, "contour_radius": 2.0}}}}"#
    ));
    let x = harness::experiment_design(&cfg).unwrap();
    let spec = cfg.domain_spec(&x).unwrap();
    // counts[latent sign][z]
    let mut counts = [[0.0f64; 2]; 2];
    for r in 0..1000 {
        let inst = harness::draw_instance(&cfg, &x, &spec, r).unwrap();
        for (t, z) in x.apply(&inst.beta).iter().zip(&inst.y) {
            counts[(*t > 0.0) as usize][*z as usize] += 1.0;
        }
    }
    let total: f64 = counts.iter().flatten().sum();
    assert_eq!(total, 1e5);
    let mut chi2 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let expected = (counts[a][0] + counts[a][1]) * (counts[0][b] + counts[1][b]) / total;
            chi2 += (counts[a][b] - expected).powi(2) / expected;
        }
    }
    // 0.999 quantile of chi-square with one degree of freedom.
    assert!(chi2 < 10.83, "chi2 = {chi2}");
    let ones = (counts[0][1] + counts[1][1]) / total;
    assert!((ones - p).abs() <= 4.0 * (p * (1.0 - p) / total).sqrt(), "Pr(z = 1) = {ones}");
}

#[test]
fn augmented_binary_design_has_small_coherence() {
    let (n, p) = (200, 50);
    let threshold = (2.0 * (((p + 1) * (p + 1)) as f64 / 0.05).ln() / n as f64).sqrt();
    let mut below = 0;
    for seed in 0..1000 {
        let x = harness::generate_design(&DesignSpec::BinaryIid, n, p, seed).unwrap();
        let (xa, _) = x.binary_augment(&SparseParam::zeros(p)).unwrap();
        if xa.coherence().unwrap() <= threshold {
            below += 1;
        }
    }
    assert!(below >= 950, "{below} of 1000 below {threshold}");
}

#[test]
fn noiseless_control_event_always_holds() {
    let mut g = rng(5);
    let x = pm1_design(&mut g, 10, 3);
    let center = SparseParam::zeros(3);
    let rep = harness::verify_control_event(&x, None, &center, &NoiseModel::GaussianIid { sigma: 0.0 }, 0.1, 4, 500, 1)
        .unwrap();
    assert_eq!(rep.frequency, 1.0);
    assert!(rep.pass);
}

#[test]
fn small_gaussian_control_event() {
    let mut g = rng(6);
    let x = pm1_design(&mut g, 10, 2);
    let center = SparseParam::zeros(2);
    let rep =
        harness::verify_control_event(&x, None, &center, &NoiseModel::GaussianIid { sigma: 1.0 }, 0.1, 3, 10_000, 2)
            .unwrap();
    assert!(rep.frequency >= 0.8 - 3.0 * rep.standard_error, "{}", rep.frequency);
    assert!(rep.multinomial_max_rel_error.is_some_and(|e| e <= 1e-9));
}

#[test]
fn tail_reports_use_the_certified_sigma() {
    let models = [
        (NoiseModel::GaussianIid { sigma: 2.0 }, 2.0),
        (NoiseModel::BoundedIid { sigma: 0.5 }, 0.5),
        (NoiseModel::BernoulliResidual { prob: 0.3 }, 1.0),
    ];
    for (m, sigma) in models {
        let rep = harness::verify_tail(&m, 15, 10_000, 3, 4).unwrap();
        assert_eq!(rep.sigma, sigma);
        assert!(rep.pass);
    }
}

#[test]
fn coverage_is_reproducible() {
    let cfg = small_lse(0.5, 0.2, 30);
    let a = harness::run_coverage(&cfg).unwrap();
    let b = harness::run_coverage(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let mean = a.replicates.iter().filter(|r| r.hit).count() as f64 / a.replicates.len() as f64;
    assert_eq!(a.coverage, mean);
}

#[test]
fn noiseless_coverage_is_complete() {
    let res = harness::run_coverage(&small_lse(0.0, 0.0, 40)).unwrap();
    assert_eq!(res.radius, 0.0);
    assert_eq!(res.hits, 40);
    assert!(res.pass);
}

#[test]
fn heavier_penalty_keeps_supports_within_truth() {
    let base = harness::run_coverage(&small_lse(1.0, 0.05, 40)).unwrap();
    let heavy = harness::run_coverage(&small_lse(1.0, 0.5, 40)).unwrap();
    for (a, b) in base.replicates.iter().zip(&heavy.replicates) {
        assert!(!a.support_within_truth || b.support_within_truth, "replicate {}", a.replicate);
        assert!(b.support_size <= a.support_size);
    }
}
