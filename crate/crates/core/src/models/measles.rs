//! SEIR metapopulation model for measles with gravity coupling between cities.
//!
//! Each unit carries `(S, E, I, R, C)`, where `C` counts removals `I -> R`
//! since the most recent observation time. Reported cases are a discretized
//! Gaussian around `rho C`.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::core::{rng_substream, Observations, Purpose, RngStream, SpatPompDims, SpatPompModel};
use crate::error::{Error, Result};

const S: usize = 0;
const E: usize = 1;
const I: usize = 2;
const R: usize = 3;
const C: usize = 4;
pub const UNIT_DIM: usize = 5;

/// Log-probability assigned to positive reports when no removals occurred.
pub const LOG_DENSITY_FLOOR: f64 = -690.0;

/// School term days of the year; the rest of the year is vacation.
const TERMS: [(f64, f64); 4] = [(7.0, 100.0), (115.0, 199.0), (252.0, 300.0), (308.0, 356.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeaslesParams {
    /// Mean transmission rate, per year.
    pub mean_beta: f64,
    pub amplitude: f64,
    /// Fraction of the year spent in school term.
    pub school_fraction: f64,
    pub alpha: f64,
    pub iota: f64,
    /// Overdispersion of the infection process, year^(1/2).
    pub sigma_se: f64,
    pub mu_ei: f64,
    pub mu_ir: f64,
    pub mu_d: f64,
    pub rho: f64,
    pub psi: f64,
    pub gravity: f64,
    /// Delay from birth to entering the susceptible class, years.
    pub birth_delay: f64,
    pub s0: f64,
    pub e0: f64,
    pub i0: f64,
    /// Euler step, years.
    pub dt_euler: f64,
}

impl Default for MeaslesParams {
    fn default() -> Self {
        Self {
            mean_beta: 1560.6,
            amplitude: 0.5,
            school_fraction: 0.759,
            alpha: 1.0,
            iota: 0.0,
            sigma_se: 0.15,
            mu_ei: 365.0 / 7.0,
            mu_ir: 365.0 / 7.0,
            mu_d: 1.0 / 50.0,
            rho: 0.5,
            psi: 0.15,
            gravity: 400.0,
            birth_delay: 4.0,
            s0: 0.032,
            e0: 0.00005,
            i0: 0.00004,
            dt_euler: 1.0 / (26.0 * 14.0),
        }
    }
}

impl MeaslesParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.mean_beta,
            self.mu_ei,
            self.mu_ir,
            self.mu_d,
            self.dt_euler,
            self.alpha,
        ];
        let fractions = [self.s0, self.e0, self.i0];
        let ok = positive.iter().all(|v| *v > 0.0)
            && self.rho > 0.0
            && self.rho < 1.0
            && (0.0..1.0).contains(&self.amplitude)
            && self.school_fraction > 0.0
            && self.school_fraction <= 1.0
            && self.iota >= 0.0
            && self.sigma_se >= 0.0
            && self.psi >= 0.0
            && self.gravity >= 0.0
            && self.birth_delay >= 0.0
            && fractions.iter().all(|f| (0.0..1.0).contains(f))
            && self.s0 + self.e0 + self.i0 < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid measles parameters {self:?}")))
        }
    }

    /// Seasonal transmission rate: raised in school term, lowered in vacation,
    /// with the term level chosen so the annual mean is `mean_beta`.
    pub fn beta(&self, t: f64) -> f64 {
        let day = (t - t.floor()) * 365.0;
        if TERMS.iter().any(|&(a, b)| day >= a && day <= b) {
            self.mean_beta * (1.0 + self.amplitude * (1.0 - self.school_fraction) / self.school_fraction)
        } else {
            self.mean_beta * (1.0 - self.amplitude)
        }
    }
}

/// Per-city demographics. Populations and birth rates are constant in time.
#[derive(Debug, Clone, PartialEq)]
pub struct Demographics {
    pub population: Vec<f64>,
    /// Births per year.
    pub birth_rate: Vec<f64>,
    pub coords: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
struct DemographicsRow {
    city_id: usize,
    population: f64,
    birth_rate: f64,
    x_coord: f64,
    y_coord: f64,
}

#[derive(Debug, Deserialize)]
struct CaseRow {
    city_id: usize,
    time_index: usize,
    cases: f64,
}

impl Demographics {
    /// Rank-size populations `3.4e6 / u` with births at 1/50 of the population
    /// per year and seeded uniform coordinates on a 500 km square.
    pub fn synthetic(n_units: usize, seed: u64) -> Self {
        let population: Vec<f64> = (1..=n_units).map(|u| (3.4e6 / u as f64).round()).collect();
        let birth_rate = population.iter().map(|p| p / 50.0).collect();
        let coords = (0..n_units)
            .map(|u| {
                let mut rng = rng_substream(seed, u as u64, 0, Purpose::Setup, 0);
                (500.0 * rng.uniform(), 500.0 * rng.uniform())
            })
            .collect();
        Self {
            population,
            birth_rate,
            coords,
        }
    }

    /// Reads `city_id,population,birth_rate,x_coord,y_coord`, with ids `1..=U`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows: Vec<DemographicsRow> = rdr.deserialize().collect::<Result<_, _>>()?;
        rows.sort_by_key(|r| r.city_id);
        if rows.iter().enumerate().any(|(k, r)| r.city_id != k + 1) {
            return Err(Error::config("demographics city_id must run 1..=U"));
        }
        Ok(Self {
            population: rows.iter().map(|r| r.population).collect(),
            birth_rate: rows.iter().map(|r| r.birth_rate).collect(),
            coords: rows.iter().map(|r| (r.x_coord, r.y_coord)).collect(),
        })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["city_id", "population", "birth_rate", "x_coord", "y_coord"])?;
        for u in 0..self.n_units() {
            w.write_record([
                (u + 1).to_string(),
                self.population[u].to_string(),
                self.birth_rate[u].to_string(),
                self.coords[u].0.to_string(),
                self.coords[u].1.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn n_units(&self) -> usize {
        self.population.len()
    }

    /// The first `n_units` cities.
    pub fn truncate(&self, n_units: usize) -> Result<Self> {
        if n_units > self.n_units() {
            return Err(Error::config(format!(
                "{n_units} cities requested, demographics has {}",
                self.n_units()
            )));
        }
        Ok(Self {
            population: self.population[..n_units].to_vec(),
            birth_rate: self.birth_rate[..n_units].to_vec(),
            coords: self.coords[..n_units].to_vec(),
        })
    }

    pub fn distance(&self, u: usize, v: usize) -> f64 {
        let (a, b) = (self.coords[u], self.coords[v]);
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    }
}

/// Reads `city_id,time_index,cases` (both indices one-based) into observations.
pub fn read_cases(path: impl AsRef<Path>, n_units: usize, n_times: usize) -> Result<Observations> {
    let mut values = vec![f64::NAN; n_units * n_times];
    let mut rdr = csv::Reader::from_path(path)?;
    for row in rdr.deserialize() {
        let row: CaseRow = row?;
        if row.city_id == 0 || row.city_id > n_units || row.time_index == 0 || row.time_index > n_times {
            return Err(Error::config(format!(
                "case row ({}, {}) outside {n_units} cities x {n_times} times",
                row.city_id, row.time_index
            )));
        }
        values[(row.time_index - 1) * n_units + row.city_id - 1] = row.cases;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::config("case data has missing (city, time) entries"));
    }
    Observations::new(n_units, n_times, values)
}

/// Gravity flows `v[u][w] = G (mean distance / mean population^2) P_u P_w / d(u, w)`.
pub fn gravity_matrix(population: &[f64], distance: &dyn Fn(usize, usize) -> f64, g: f64) -> Result<Vec<f64>> {
    let u = population.len();
    let mut v = vec![0.0; u * u];
    if u < 2 {
        return Ok(v);
    }
    let mut d_sum = 0.0;
    for a in 0..u {
        for b in 0..u {
            if a != b {
                let d = distance(a, b);
                if !(d > 0.0) {
                    return Err(Error::config(format!("cities {a} and {b} are at distance {d}")));
                }
                d_sum += d;
            }
        }
    }
    let d_bar = d_sum / (u * (u - 1)) as f64;
    let p_bar = population.iter().sum::<f64>() / u as f64;
    let k = g * d_bar / (p_bar * p_bar);
    for a in 0..u {
        for b in 0..u {
            if a != b {
                v[a * u + b] = k * population[a] * population[b] / distance(a, b);
            }
        }
    }
    Ok(v)
}

/// Observation-model parameters rewritten by moment matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportingParams {
    pub rho: f64,
    pub psi: f64,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `log P[Y = y | Z = z]` for the discretized Gaussian report model.
pub fn measurement_logdensity(y: f64, z: f64, rho: f64, psi: f64) -> f64 {
    let mean = rho * z;
    let var = rho * (1.0 - rho) * z + psi * psi * rho * rho * z * z;
    if !(var > 0.0) {
        return if y == 0.0 { 0.0 } else { LOG_DENSITY_FLOOR };
    }
    let sd = var.sqrt();
    let hi = (y + 0.5 - mean) / sd;
    if y <= 0.0 {
        return normal_cdf(hi).ln().max(LOG_DENSITY_FLOOR);
    }
    let lo = (y - 0.5 - mean) / sd;
    // use whichever tail keeps the difference well conditioned
    let p = if lo > 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    };
    if p > 1e-300 {
        p.ln()
    } else {
        // far tail: the interval probability is the density times the unit width
        let r = (y - mean) / sd;
        (-0.5 * r * r - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()).max(LOG_DENSITY_FLOOR)
    }
}

pub struct Measles {
    dims: SpatPompDims,
    params: MeaslesParams,
    demographics: Demographics,
    flows: Vec<f64>,
    rate_clamps: Arc<AtomicUsize>,
}

impl Clone for Measles {
    fn clone(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            params: self.params.clone(),
            demographics: self.demographics.clone(),
            flows: self.flows.clone(),
            rate_clamps: Arc::new(AtomicUsize::new(self.rate_clamps.load(Ordering::Relaxed))),
        }
    }
}

impl std::fmt::Debug for Measles {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Measles")
            .field("n_units", &self.dims.n_units())
            .field("n_times", &self.dims.n_times())
            .field("params", &self.params)
            .finish()
    }
}

/// Births and deaths summed over units during one Euler step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepFlows {
    pub births: f64,
    pub deaths: f64,
}

impl Measles {
    /// Biweekly observations starting at `t0 = 0`.
    pub fn new(n_times: usize, params: MeaslesParams, demographics: Demographics) -> Result<Self> {
        let dims = SpatPompDims::regular(demographics.n_units(), n_times, 0.0, 1.0 / 26.0)?;
        Self::with_dims(dims, params, demographics)
    }

    pub fn with_dims(dims: SpatPompDims, params: MeaslesParams, demographics: Demographics) -> Result<Self> {
        params.validate()?;
        if demographics.n_units() != dims.n_units() {
            return Err(Error::Dimension(format!(
                "{} cities of demographics for {} units",
                demographics.n_units(),
                dims.n_units()
            )));
        }
        if demographics.population.iter().any(|p| !(*p > 0.0)) || demographics.birth_rate.iter().any(|b| *b < 0.0) {
            return Err(Error::config("populations must be positive and birth rates nonnegative"));
        }
        let flows = gravity_matrix(&demographics.population, &|a, b| demographics.distance(a, b), params.gravity)?;
        Ok(Self {
            dims,
            params,
            demographics,
            flows,
            rate_clamps: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn params(&self) -> &MeaslesParams {
        &self.params
    }

    pub fn demographics(&self) -> &Demographics {
        &self.demographics
    }

    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    /// Times the expected infection flow went negative and was clamped to zero.
    pub fn rate_clamp_events(&self) -> usize {
        self.rate_clamps.load(Ordering::Relaxed)
    }

    /// Births entering `S` at time `t` are those of `t - birth_delay`; the
    /// birth series is constant, so the delay leaves the rate unchanged.
    fn births_per_year(&self, u: usize, _t: f64) -> f64 {
        self.demographics.birth_rate[u]
    }

    /// Expected flow `S -> E` in unit `u` (persons per year), clamped at zero.
    pub fn transmission_rate(&self, x: &[f64], t: f64, u: usize) -> f64 {
        let prevalence: Vec<f64> = (0..self.dims.n_units())
            .map(|v| (x[v * UNIT_DIM + I] / self.demographics.population[v]).powf(self.params.alpha))
            .collect();
        self.rate_from_prevalence(x, t, u, &prevalence)
    }

    fn rate_from_prevalence(&self, x: &[f64], t: f64, u: usize, prevalence: &[f64]) -> f64 {
        let n = self.dims.n_units();
        let p_u = self.demographics.population[u];
        let own = ((x[u * UNIT_DIM + I] + self.params.iota) / p_u).powf(self.params.alpha);
        let mut coupling = 0.0;
        for v in 0..n {
            if v != u {
                coupling += self.flows[u * n + v] / p_u * (prevalence[v] - prevalence[u]);
            }
        }
        let rate = self.params.beta(t) * x[u * UNIT_DIM + S] * (own + coupling);
        if rate < 0.0 {
            self.rate_clamps.fetch_add(1, Ordering::Relaxed);
            return 0.0;
        }
        rate
    }

    /// One Euler step of length `h` from time `t`.
    ///
    /// The infection hazard is multiplied by gamma noise with mean 1 and
    /// variance `sigma_se^2 / h`; each compartment's exits are binomial with
    /// competing-risk probabilities, and births are Poisson.
    pub fn euler_step(&self, x: &mut [f64], t: f64, h: f64, rng: &mut RngStream) -> StepFlows {
        let p = &self.params;
        let n = self.dims.n_units();
        let prevalence: Vec<f64> = (0..n)
            .map(|v| (x[v * UNIT_DIM + I] / self.demographics.population[v]).powf(p.alpha))
            .collect();
        let noise = (p.sigma_se > 0.0).then(|| {
            let s2 = p.sigma_se * p.sigma_se;
            Gamma::new(h / s2, s2 / h).expect("gamma parameters")
        });
        let mut flows = StepFlows::default();
        for u in 0..n {
            let xs = &x[u * UNIT_DIM..(u + 1) * UNIT_DIM];
            let s = xs[S];
            let mut per_capita_se = if s > 0.0 {
                self.rate_from_prevalence(x, t, u, &prevalence) / s
            } else {
                0.0
            };
            if let Some(g) = &noise {
                per_capita_se *= g.sample(rng);
            }
            let (n_se, n_sd) = competing_exits(s, per_capita_se, p.mu_d, h, rng);
            let (n_ei, n_ed) = competing_exits(x[u * UNIT_DIM + E], p.mu_ei, p.mu_d, h, rng);
            let (n_ir, n_id) = competing_exits(x[u * UNIT_DIM + I], p.mu_ir, p.mu_d, h, rng);
            let (_, n_rd) = competing_exits(x[u * UNIT_DIM + R], 0.0, p.mu_d, h, rng);
            let lambda = self.births_per_year(u, t) * h;
            let births = if lambda > 0.0 {
                Poisson::new(lambda).expect("poisson rate").sample(rng)
            } else {
                0.0
            };
            let xu = &mut x[u * UNIT_DIM..(u + 1) * UNIT_DIM];
            xu[S] += births - n_se - n_sd;
            xu[E] += n_se - n_ei - n_ed;
            xu[I] += n_ei - n_ir - n_id;
            xu[R] += n_ir - n_rd;
            xu[C] += n_ir;
            flows.births += births;
            flows.deaths += n_sd + n_ed + n_id + n_rd;
        }
        flows
    }

    /// Expected value of [`Measles::euler_step`] without noise: the deterministic skeleton.
    fn skeleton_step(&self, x: &mut [f64], t: f64, h: f64) {
        let p = &self.params;
        let n = self.dims.n_units();
        let prevalence: Vec<f64> = (0..n)
            .map(|v| (x[v * UNIT_DIM + I].max(0.0) / self.demographics.population[v]).powf(p.alpha))
            .collect();
        for u in 0..n {
            let s = x[u * UNIT_DIM + S];
            let r_se = if s > 0.0 {
                self.rate_from_prevalence(x, t, u, &prevalence) / s
            } else {
                0.0
            };
            let (n_se, n_sd) = mean_exits(s, r_se, p.mu_d, h);
            let (n_ei, n_ed) = mean_exits(x[u * UNIT_DIM + E], p.mu_ei, p.mu_d, h);
            let (n_ir, n_id) = mean_exits(x[u * UNIT_DIM + I], p.mu_ir, p.mu_d, h);
            let (_, n_rd) = mean_exits(x[u * UNIT_DIM + R], 0.0, p.mu_d, h);
            let births = self.births_per_year(u, t) * h;
            let xu = &mut x[u * UNIT_DIM..(u + 1) * UNIT_DIM];
            xu[S] += births - n_se - n_sd;
            xu[E] += n_se - n_ei - n_ed;
            xu[I] += n_ei - n_ir - n_id;
            xu[R] += n_ir - n_rd;
            xu[C] += n_ir;
        }
    }

    /// Splits `[t_a, t_b]` at observation times so `C` restarts at each one.
    fn advance(&self, x: &mut [f64], t_a: f64, t_b: f64, mut step: impl FnMut(&mut [f64], f64, f64)) {
        if t_b <= t_a {
            return;
        }
        let mut cuts = vec![t_a];
        cuts.extend(self.dims.obs_times().iter().copied().filter(|&t| t > t_a + 1e-9 && t < t_b - 1e-9));
        cuts.push(t_b);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if self.dims.is_grid_time(a) {
                for u in 0..self.dims.n_units() {
                    x[u * UNIT_DIM + C] = 0.0;
                }
            }
            let steps = ((b - a) / self.params.dt_euler - 1e-9).ceil().max(1.0) as usize;
            let h = (b - a) / steps as f64;
            for k in 0..steps {
                step(x, a + k as f64 * h, h);
            }
        }
    }
}

fn competing_exits(count: f64, rate_a: f64, rate_b: f64, h: f64, rng: &mut RngStream) -> (f64, f64) {
    let total = rate_a + rate_b;
    if count <= 0.0 || !(total > 0.0) {
        return (0.0, 0.0);
    }
    let p_exit = (-(-total * h).exp_m1()).clamp(0.0, 1.0);
    let exits = Binomial::new(count as u64, p_exit).expect("binomial").sample(rng);
    if exits == 0 {
        return (0.0, 0.0);
    }
    let a = Binomial::new(exits, (rate_a / total).clamp(0.0, 1.0)).expect("binomial").sample(rng);
    (a as f64, (exits - a) as f64)
}

fn mean_exits(count: f64, rate_a: f64, rate_b: f64, h: f64) -> (f64, f64) {
    let total = rate_a + rate_b;
    if count <= 0.0 || !(total > 0.0) {
        return (0.0, 0.0);
    }
    let exits = count * -(-total * h).exp_m1();
    (exits * rate_a / total, exits * rate_b / total)
}

impl SpatPompModel for Measles {
    type Theta = ReportingParams;

    fn dims(&self) -> &SpatPompDims {
        &self.dims
    }

    fn unit_dim(&self) -> usize {
        UNIT_DIM
    }

    fn theta(&self) -> ReportingParams {
        ReportingParams {
            rho: self.params.rho,
            psi: self.params.psi,
        }
    }

    fn simulate_initial(&self, _rng: &mut RngStream) -> Vec<f64> {
        let p = &self.params;
        let mut x = Vec::with_capacity(self.dims.n_units() * UNIT_DIM);
        for &pop in &self.demographics.population {
            let pop = pop.round();
            let (s, e, i) = ((p.s0 * pop).round(), (p.e0 * pop).round(), (p.i0 * pop).round());
            x.extend_from_slice(&[s, e, i, pop - s - e - i, 0.0]);
        }
        x
    }

    fn simulate_transition(&self, x: &mut [f64], t_a: f64, t_b: f64, rng: &mut RngStream) {
        self.advance(x, t_a, t_b, |x, t, h| {
            self.euler_step(x, t, h, rng);
        });
    }

    fn measurement_logdensity(&self, _u: usize, _n: usize, y: f64, x_u: &[f64], th: &ReportingParams) -> f64 {
        measurement_logdensity(y, x_u[C], th.rho, th.psi)
    }

    fn simulate_measurement(&self, _u: usize, _n: usize, x_u: &[f64], rng: &mut RngStream) -> f64 {
        let (rho, psi) = (self.params.rho, self.params.psi);
        let z = x_u[C];
        let var = rho * (1.0 - rho) * z + psi * psi * rho * rho * z * z;
        let draw = rho * z + var.max(0.0).sqrt() * rng.normal();
        (draw + 0.5).floor().max(0.0)
    }

    fn measurement_mean(&self, _u: usize, _n: usize, x_u: &[f64]) -> f64 {
        self.params.rho * x_u[C]
    }

    fn measurement_var(&self, _u: usize, _n: usize, x_u: &[f64], th: &ReportingParams) -> f64 {
        let c = x_u[C];
        th.rho * (1.0 - th.rho) * c + th.psi * th.psi * th.rho * th.rho * c * c
    }

    fn var_to_theta(&self, _u: usize, _n: usize, v: f64, x_u: &[f64], th: &ReportingParams) -> (ReportingParams, bool) {
        let c = x_u[C];
        let binomial = th.rho * (1.0 - th.rho) * c;
        if !(c > 0.0) || !(v >= binomial) {
            return (ReportingParams { rho: th.rho, psi: 0.0 }, true);
        }
        let psi = (v - binomial).sqrt() / (th.rho * c);
        (ReportingParams { rho: th.rho, psi }, false)
    }

    fn forecast_mean(&self, x: &[f64], s: f64, t: f64) -> Vec<f64> {
        let mut m = x.to_vec();
        self.advance(&mut m, s, t, |x, t, h| self.skeleton_step(x, t, h));
        m
    }

    fn project_state(&self, x: &mut [f64]) {
        for v in x.iter_mut() {
            *v = v.max(0.0).round();
        }
    }
}
