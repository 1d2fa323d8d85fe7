use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use spatfilter::bagged::BaggedConfig;
use spatfilter::core::{simulate_dataset, Neighborhood, SpatPompDims};
use spatfilter::inference::{
    iabf_maximize, mcap_interval, run_profile, run_slice, BmFamily, FilterSpec, IabfConfig, ModelFamily,
    ProfilePoint,
};
use spatfilter::models::CorrelatedBm;
use spatfilter::Error;

fn family(u: usize, n: usize) -> (BmFamily, spatfilter::Observations) {
    let dims = SpatPompDims::regular(u, n, 0.0, 1.0).unwrap();
    let truth = CorrelatedBm::with_dims(dims.clone(), 0.4, 1.0).unwrap();
    (BmFamily::new(dims, 0.4, 1.0), simulate_dataset(&truth, 17).obs)
}

fn rho_grid() -> Vec<f64> {
    (0..9).map(|i| 0.2 + 0.05 * i as f64).collect()
}

fn ok(points: Vec<spatfilter::Result<ProfilePoint>>) -> Vec<ProfilePoint> {
    points.into_iter().map(|p| p.unwrap()).collect()
}

#[test]
fn kalman_slice_peaks_near_truth() {
    let (fam, obs) = family(10, 50);
    let pts = ok(run_slice(&fam, &obs, "rho", &rho_grid(), &FilterSpec::Kalman, 3, 1).unwrap());
    let best = pts.iter().max_by(|a, b| a.loglik.total_cmp(&b.loglik)).unwrap();
    assert!((best.value - 0.4).abs() <= 0.05 + 1e-12, "argmax {}", best.value);
    assert!(pts.iter().all(|p| p.mc_se == 0.0 && p.replicates.len() == 1));
}

#[test]
fn single_point_slice() {
    let (fam, obs) = family(3, 5);
    let spec = FilterSpec::Pf { particles: 100 };
    let pts = ok(run_slice(&fam, &obs, "rho", &[0.3], &spec, 4, 2).unwrap());
    assert_eq!(pts.len(), 1);
    assert!(pts[0].mc_se > 0.0);
    assert!(matches!(mcap_interval(&pts, 0.95), Err(Error::UnboundedInterval)));
}

#[test]
fn slice_is_independent_of_grid_order() {
    let (fam, obs) = family(3, 5);
    let spec = FilterSpec::Abf(BaggedConfig::new(10, 5, Neighborhood::CoLocatedLags(1), 0));
    let grid = rho_grid();
    let fwd = ok(run_slice(&fam, &obs, "rho", &grid, &spec, 2, 8).unwrap());
    let rev_grid: Vec<f64> = grid.iter().rev().copied().collect();
    let mut rev = ok(run_slice(&fam, &obs, "rho", &rev_grid, &spec, 2, 8).unwrap());
    rev.reverse();
    assert_eq!(fwd, rev);
}

#[test]
fn empty_grids_are_rejected() {
    let (fam, obs) = family(2, 3);
    assert!(run_slice(&fam, &obs, "rho", &[], &FilterSpec::Kalman, 1, 0).is_err());
    assert!(run_slice(&fam, &obs, "nope", &[0.1], &FilterSpec::Kalman, 1, 0).is_err());
}

fn iabf_cfg(start: Vec<Vec<f64>>, rw: Vec<f64>, keep: f64) -> IabfConfig {
    IabfConfig {
        iterations: 2,
        rw_var: rw,
        cooling: 0.5,
        keep,
        start,
        fixed: vec![],
        filter: BaggedConfig::new(10, 4, Neighborhood::CoLocatedLags(1), 3),
    }
}

#[test]
fn no_perturbation_and_no_selection_keeps_the_swarm() {
    let (fam, obs) = family(3, 6);
    let start: Vec<Vec<f64>> = (0..6).map(|k| vec![0.1 + 0.1 * k as f64, 1.0]).collect();
    let res = iabf_maximize(&fam, &obs, &iabf_cfg(start.clone(), vec![0.0, 0.0], 1.0)).unwrap();
    let mut got = res.params.clone();
    got.sort_by(|a, b| a[0].total_cmp(&b[0]));
    assert_eq!(got, start);
}

#[test]
fn fixed_parameters_do_not_move() {
    let (fam, obs) = family(3, 6);
    let start = vec![vec![0.3, 1.3]; 8];
    let mut cfg = iabf_cfg(start, vec![0.1, 0.1], 0.5);
    cfg.fixed = vec!["tau".into()];
    let res = iabf_maximize(&fam, &obs, &cfg).unwrap();
    assert!(res.params.iter().all(|p| p[1] == 1.3));
    assert!(res.params.iter().any(|p| p[0] != 0.3));
    assert_eq!(res.trace.len(), 2);
}

#[test]
fn profile_with_everything_fixed_is_a_slice() {
    let (fam, obs) = family(3, 5);
    let spec = FilterSpec::Abf(BaggedConfig::new(10, 5, Neighborhood::CoLocatedLags(1), 0));
    let grid = [0.3, 0.4, 0.5];
    let mut cfg = iabf_cfg(vec![fam.base(); 4], vec![0.1, 0.1], 0.5);
    cfg.iterations = 1;
    cfg.fixed = vec!["tau".into()];
    let prof = ok(run_profile(&fam, &obs, "rho", &grid, &cfg, &spec, 3, 4).unwrap());
    let slice = ok(run_slice(&fam, &obs, "rho", &grid, &spec, 3, 4).unwrap());
    for (p, s) in prof.iter().zip(&slice) {
        assert!((p.loglik - s.loglik).abs() < 1e-9);
    }
}

#[test]
fn mcap_covers_truth_on_noisy_kalman_slices() {
    let (fam, obs) = family(10, 30);
    let grid: Vec<f64> = (0..9).map(|i| 0.2 + 0.05 * i as f64).collect();
    let exact = ok(run_slice(&fam, &obs, "rho", &grid, &FilterSpec::Kalman, 1, 0).unwrap());
    let kf_ci = mcap_interval(&exact, 0.95).unwrap();
    assert!(kf_ci.lo < 0.4 && 0.4 < kf_ci.hi);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut covered = 0;
    for _ in 0..100 {
        let noisy: Vec<ProfilePoint> = exact
            .iter()
            .map(|p| ProfilePoint {
                loglik: p.loglik + noise.sample(&mut rng),
                mc_se: 0.3,
                ..p.clone()
            })
            .collect();
        if let Ok(ci) = mcap_interval(&noisy, 0.95) {
            if ci.lo <= 0.4 && 0.4 <= ci.hi {
                covered += 1;
            }
        }
    }
    assert!(covered >= 90, "covered {covered}/100");
}
