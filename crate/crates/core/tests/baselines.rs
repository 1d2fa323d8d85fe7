mod common;

use common::mean;
use spatfilter::baselines::{
    bpf_loglik, enkf_filter, enkf_loglik, girf_filter, girf_loglik, kalman_loglik, pf_filter, pf_loglik,
    BlockPartition, GirfConfig,
};
use spatfilter::core::{rng_substream, simulate_dataset, Observations, Purpose, RngStream, SpatPompDims, SpatPompModel};
use spatfilter::models::{CorrelatedBm, SvToy};

fn bm(u: usize, n: usize, rho: f64, seed: u64) -> (CorrelatedBm, Observations, f64) {
    let m = CorrelatedBm::new(u, n, rho, 1.0).unwrap();
    let obs = simulate_dataset(&m, seed).obs;
    let kf = kalman_loglik(&m.kalman_system(), &obs).unwrap().loglik.total();
    (m, obs, kf)
}

fn se(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0) / v.len() as f64).sqrt()
}

#[test]
fn single_particle_pf_scores_one_trajectory() {
    let (m, obs, _) = bm(3, 6, 0.4, 1);
    let r = pf_loglik(&m, &obs, 1, 21).unwrap();
    let mut x = m.simulate_initial(&mut rng_substream(21, 0, 0, Purpose::Init, 0));
    let mut total = 0.0;
    for n in 0..6 {
        m.simulate_transition(&mut x, n as f64, n as f64 + 1.0, &mut rng_substream(21, 0, n, Purpose::Propose, 0));
        total += (0..3).fold(0.0, |a, u| a + m.measurement_logdensity(u, n, obs.get(u, n), &x[u..=u], &1.0));
    }
    assert!((r.total() - total).abs() < 1e-12);
    assert_eq!(r.total(), r.per_time().iter().fold(0.0, |a, b| a + b));
}

#[test]
fn one_block_bpf_is_pf() {
    let (m, obs, _) = bm(5, 8, 0.4, 2);
    let whole = BlockPartition::new(vec![(0..5).collect()], 5).unwrap();
    assert_eq!(bpf_loglik(&m, &obs, 300, &whole, 4).unwrap(), pf_loglik(&m, &obs, 300, 4).unwrap());
}

#[test]
fn pf_is_consistent_on_one_unit() {
    let (m, obs, kf) = bm(1, 20, 0.0, 3);
    let est: Vec<f64> = (0..20).map(|s| pf_loglik(&m, &obs, 10_000, s).unwrap().total()).collect();
    assert!((mean(&est) - kf).abs() < 0.2, "pf {} kf {kf}", mean(&est));
}

#[test]
fn unit_blocks_are_unbiased_for_independent_units() {
    let (m, obs, kf) = bm(4, 10, 0.0, 4);
    let blocks = BlockPartition::contiguous(4, 1).unwrap();
    let est: Vec<f64> = (0..20).map(|s| bpf_loglik(&m, &obs, 2000, &blocks, s).unwrap().total()).collect();
    assert!((mean(&est) - kf).abs() < 3.0 * se(&est) + 0.05, "bpf {} kf {kf}", mean(&est));
}

#[test]
fn enkf_is_near_exact_on_linear_gaussian() {
    let (m, obs, kf) = bm(10, 50, 0.4, 5);
    let e = enkf_loglik(&m, &obs, 10_000, 9).unwrap().total();
    assert!((e - kf).abs() < 2.0, "enkf {e} kf {kf}");
}

#[test]
fn enkf_mean_ignores_volatility_data() {
    let m = SvToy::new(100, 1.0).unwrap();
    let data = simulate_dataset(&m, 6);
    let out = enkf_filter(&m, &data.obs, 10_000, 2, &[&|x: &[f64]| x[0]]).unwrap();
    let latent = data.latent.unwrap();
    let rms = (latent[1..].iter().map(|x| x[0] * x[0]).sum::<f64>() / 100.0).sqrt();
    let max = out.means.iter().map(|m| m[0].abs()).fold(0.0, f64::max);
    assert!(max < 0.1 * rms, "max |mean| {max}, rms {rms}");
}

/// A latent state frozen at 1.0 observed with unit noise.
struct Frozen {
    dims: SpatPompDims,
}

impl SpatPompModel for Frozen {
    type Theta = ();
    fn dims(&self) -> &SpatPompDims {
        &self.dims
    }
    fn unit_dim(&self) -> usize {
        1
    }
    fn theta(&self) {}
    fn simulate_initial(&self, _: &mut RngStream) -> Vec<f64> {
        vec![1.0; self.dims.n_units()]
    }
    fn simulate_transition(&self, _: &mut [f64], _: f64, _: f64, _: &mut RngStream) {}
    fn measurement_logdensity(&self, _: usize, _: usize, y: f64, x: &[f64], _: &()) -> f64 {
        -0.5 * ((y - x[0]).powi(2) + (2.0 * std::f64::consts::PI).ln())
    }
    fn simulate_measurement(&self, _: usize, _: usize, x: &[f64], rng: &mut RngStream) -> f64 {
        x[0] + rng.normal()
    }
    fn measurement_mean(&self, _: usize, _: usize, x: &[f64]) -> f64 {
        x[0]
    }
    fn measurement_var(&self, _: usize, _: usize, _: &[f64], _: &()) -> f64 {
        1.0
    }
    fn var_to_theta(&self, _: usize, _: usize, _: f64, _: &[f64], _: &()) -> ((), bool) {
        ((), false)
    }
    fn forecast_mean(&self, x: &[f64], _: f64, _: f64) -> Vec<f64> {
        x.to_vec()
    }
}

#[test]
fn enkf_leaves_a_collapsed_ensemble_alone() {
    let m = Frozen {
        dims: SpatPompDims::regular(3, 4, 0.0, 1.0).unwrap(),
    };
    let obs = Observations::new(3, 4, vec![1.0; 12]).unwrap();
    let fs: Vec<Box<dyn Fn(&[f64]) -> f64 + Sync>> = (0..3).map(|u| Box::new(move |x: &[f64]| x[u]) as _).collect();
    let refs: Vec<&(dyn Fn(&[f64]) -> f64 + Sync)> = fs.iter().map(|f| f.as_ref()).collect();
    let out = enkf_filter(&m, &obs, 50, 1, &refs).unwrap();
    for row in &out.means {
        assert_eq!(row, &vec![1.0; 3]);
    }
    // predictive density N(1; 1, 1) per unit
    let expect = -0.5 * (2.0 * std::f64::consts::PI).ln() * 3.0;
    for v in out.loglik.per_time() {
        assert!((v - expect).abs() < 1e-9);
    }
}

#[test]
fn pf_filter_means_track_kalman() {
    let (m, obs, _) = bm(2, 10, 0.4, 7);
    let kf = kalman_loglik(&m.kalman_system(), &obs).unwrap();
    let out = pf_filter(&m, &obs, 20_000, 3, &[&|x: &[f64]| x[0]]).unwrap();
    for n in 0..10 {
        let sd = kf.covariances[n][(0, 0)].sqrt();
        assert!((out.means[n][0] - kf.means[n][0]).abs() < 0.1 * sd);
    }
}

#[test]
fn girf_near_kalman_on_one_unit() {
    let (m, obs, kf) = bm(1, 20, 0.0, 8);
    let cfg = GirfConfig::new(1000, 10, 2, 3, 5);
    let g = girf_loglik(&m, &obs, &cfg).unwrap().total();
    assert!((g - kf).abs() < 0.5, "girf {g} kf {kf}");
}

#[test]
fn girf_substeps_telescope() {
    let (m, obs, _) = bm(3, 6, 0.4, 9);
    let out = girf_filter(&m, &obs, &GirfConfig::new(200, 5, 2, 4, 1)).unwrap();
    for (row, v) in out.substep_log_means.iter().zip(out.loglik.per_time()) {
        assert_eq!(row.len(), 4);
        assert!((row.iter().sum::<f64>() - v).abs() < 1e-10);
    }
}

#[test]
fn girf_without_lookahead_agrees_with_pf_in_law() {
    let (m, obs, _) = bm(2, 10, 0.4, 10);
    let cfg = |s| GirfConfig::new(200, 4, 1, 1, s);
    let g: Vec<f64> = (0..50).map(|s| girf_loglik(&m, &obs, &cfg(s)).unwrap().total()).collect();
    let p: Vec<f64> = (0..50).map(|s| pf_loglik(&m, &obs, 200, 1000 + s).unwrap().total()).collect();
    let diff_se = (se(&g).powi(2) + se(&p).powi(2)).sqrt();
    assert!((mean(&g) - mean(&p)).abs() < 3.0 * diff_se + 0.02, "girf {} pf {}", mean(&g), mean(&p));
}
