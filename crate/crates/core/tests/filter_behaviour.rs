use qtomo_core::design::Strategy;
use qtomo_core::likelihood::NoiseModel;
use qtomo_core::numerics::{angle_between, dot3};
use qtomo_core::qubit::{embed, MeasurementConfig};
use qtomo_core::runner::{run_experiment, run_single, RunConfig, TruthSpec};
use qtomo_core::{Apparatus, FilterConfig, Posterior, PriorKind, QubitState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn x4_moment(post: &Posterior) -> f64 {
    post.particles()
        .iter()
        .map(|p| p.log_weight.exp() * p.coord.coords()[3].powi(2))
        .sum()
}

#[test]
fn moves_without_data_keep_the_prior() {
    let cfg = FilterConfig {
        particles: 1000,
        mh_steps: 10,
        ..FilterConfig::default()
    };
    let mut post = Posterior::init(PriorKind::BuresHaar, cfg, 5).unwrap();
    let before = x4_moment(&post);
    post.resample_move(&NoiseModel::ideal()).unwrap();
    let xs: Vec<f64> = post
        .particles()
        .iter()
        .map(|p| p.coord.coords()[3].powi(2))
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    let sigma = (var / xs.len() as f64).sqrt();
    assert!((before - 1.0 / 16.0).abs() < 3.0 * sigma, "{before}");
    assert!((mean - 1.0 / 16.0).abs() < 3.0 * sigma, "{mean} +- {sigma}");
}

#[test]
fn posterior_mean_finds_a_mixed_state() {
    let truth = QubitState::new(0.3, -0.5, 0.4).unwrap();
    let mut app = Apparatus::new(truth, NoiseModel::ideal(), 11).unwrap();
    let mut post = Posterior::init(PriorKind::BuresHaar, FilterConfig::default(), 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut acceptance = Vec::new();
    for _ in 0..500 {
        let g: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let cfg = MeasurementConfig::from_axis(g).unwrap();
        let counts = app.draw_block(&cfg, 1).unwrap();
        let report = post.update(&cfg, &counts, &NoiseModel::ideal()).unwrap();
        acceptance.extend(report.resampled.map(|m| m.mean_acceptance));
    }
    let m = post.mean_state().stokes();
    let t = truth.stokes();
    let d = ((0..3).map(|k| (m[k] - t[k]).powi(2)).sum::<f64>()).sqrt();
    assert!(d < 0.1, "distance {d}");
    assert!(!acceptance.is_empty());
    let mean_acc = acceptance.iter().sum::<f64>() / acceptance.len() as f64;
    assert!((0.1..0.7).contains(&mean_acc), "{mean_acc}");
}

#[test]
fn adaptive_axes_gather_around_the_state() {
    let mut cfg = RunConfig::new(2000);
    cfg.blocks = false;
    cfg.master_seed = 21;
    let run = run_single(&cfg, 0).unwrap();
    assert!(run.failure.is_none());
    let t = run.truth.stokes();
    let late: Vec<_> = run.events.iter().filter(|e| e.n > 200).collect();
    let close = late
        .iter()
        .filter(|e| {
            let b = [e.axis_1, e.axis_2, e.axis_3];
            let a = if dot3(&b, &t) < 0.0 { b.map(|x| -x) } else { b };
            angle_between(&a, &t) < 0.3
        })
        .count();
    assert!(2 * close >= late.len(), "{close} of {}", late.len());
}

#[test]
fn averaged_curve_decreases() {
    let mut cfg = RunConfig::new(2000);
    cfg.n_runs = 20;
    cfg.master_seed = 3;
    cfg.filter.particles = 500;
    for strategy in [Strategy::adaptive(), Strategy::Random] {
        cfg.strategy = strategy;
        let res = run_experiment(&cfg).unwrap();
        let ys: Vec<f64> = res.average.iter().map(|p| p.infid_to_true).collect();
        let steps = ys.windows(2).count();
        let down = ys.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(down * 10 >= steps * 9, "{down}/{steps}: {ys:?}");
        assert!(res
            .average
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.infid_to_true)));
    }
}

#[test]
fn mixed_truth_run_tracks_radius() {
    let mut cfg = RunConfig::new(3000);
    cfg.truth = TruthSpec::Fixed {
        stokes: [0.0, 0.6, 0.0],
    };
    let run = run_single(&cfg, 0).unwrap();
    let last = run.records.last().unwrap();
    assert!(last.infid_to_true.unwrap() < 0.01);
    assert!(embed(&run.truth).coords()[3] > 0.0);
}
