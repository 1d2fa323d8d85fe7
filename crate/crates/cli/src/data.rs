//! Model families named in a config, and the observation and latent CSV files.

use std::path::Path;

use anyhow::{bail, Context, Result};

use spatfilter::inference::{BmFamily, LorenzFamily, MeaslesFamily, ModelFamily};
use spatfilter::models::{Demographics, Lorenz96Params, MeaslesParams};
use spatfilter::{Observations, SpatPompDims, SpatPompModel};

use crate::config::{override_fields, ModelConfig};

pub enum AnyFamily {
    Bm(BmFamily),
    Lorenz(LorenzFamily),
    Measles(MeaslesFamily, Demographics),
}

/// Runs `$body` with `$f` bound to the concrete family.
#[macro_export]
macro_rules! with_family {
    ($fam:expr, $f:ident => $body:expr) => {
        match $fam {
            $crate::data::AnyFamily::Bm($f) => $body,
            $crate::data::AnyFamily::Lorenz($f) => $body,
            $crate::data::AnyFamily::Measles($f, _) => $body,
        }
    };
}

/// The family of `model` at `units` units.
pub fn build_family(model: &ModelConfig, units: usize) -> Result<AnyFamily> {
    let n = model.times;
    match model.name.as_str() {
        "bm" => {
            let mut rho = 0.4;
            let mut tau = 1.0;
            for (k, v) in &model.params {
                match k.as_str() {
                    "rho" => rho = *v,
                    "tau" => tau = *v,
                    other => bail!("unknown parameter {other}"),
                }
            }
            Ok(AnyFamily::Bm(BmFamily::new(SpatPompDims::regular(units, n, 0.0, 1.0)?, rho, tau)))
        }
        "lorenz" => {
            let p: Lorenz96Params = override_fields(&Lorenz96Params::default(), &model.params)?;
            let dims = SpatPompDims::regular(units, n, 0.0, 1.0)?;
            let fam = LorenzFamily::new(dims, p);
            fam.build(&fam.base())?;
            Ok(AnyFamily::Lorenz(fam))
        }
        "measles" => {
            let p: MeaslesParams = override_fields(&MeaslesParams::default(), &model.params)?;
            let demo = match &model.demographics_path {
                Some(path) => Demographics::from_csv(path)
                    .with_context(|| format!("reading {}", path.display()))?
                    .truncate(units)?,
                None => Demographics::synthetic(units, model.demographics_seed),
            };
            let dims = SpatPompDims::regular(units, n, 0.0, 1.0 / 26.0)?;
            let fam = MeaslesFamily::new(dims, p, demo.clone());
            fam.build(&fam.base())?;
            Ok(AnyFamily::Measles(fam, demo))
        }
        other => bail!("unknown model {other}"),
    }
}

fn value_header(model: &str) -> [&'static str; 3] {
    if model == "measles" {
        ["city_id", "time_index", "cases"]
    } else {
        ["unit", "time_index", "y"]
    }
}

/// One row per observation, indices one-based, time outer.
pub fn write_observations(path: &Path, model: &str, obs: &Observations) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(value_header(model))?;
    for n in 0..obs.n_times() {
        for u in 0..obs.n_units() {
            w.write_record([(u + 1).to_string(), (n + 1).to_string(), obs.get(u, n).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `unit,time_index,value` rows (any header names, one-based indices).
pub fn read_observations(path: &Path, n_units: usize, n_times: usize) -> Result<Observations> {
    let mut values = vec![f64::NAN; n_units * n_times];
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            bail!("{}: row {} has {} fields, expected 3", path.display(), line + 2, rec.len());
        }
        let u: usize = rec[0].trim().parse()?;
        let n: usize = rec[1].trim().parse()?;
        let y: f64 = rec[2].trim().parse()?;
        if u == 0 || u > n_units || n == 0 || n > n_times {
            bail!("observation ({u}, {n}) outside {n_units} units x {n_times} times");
        }
        values[(n - 1) * n_units + u - 1] = y;
    }
    if values.iter().any(|v| v.is_nan()) {
        bail!("{}: missing (unit, time) entries", path.display());
    }
    Ok(Observations::new(n_units, n_times, values)?)
}

/// Long format `unit,time_index,component,value`; `time_index` 0 is the initial state.
pub fn write_latent<M: SpatPompModel>(path: &Path, model: &M, latent: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["unit", "time_index", "component", "value"])?;
    for (n, x) in latent.iter().enumerate() {
        for u in 0..model.dims().n_units() {
            for (c, v) in model.unit_state(x, u).iter().enumerate() {
                w.write_record([(u + 1).to_string(), n.to_string(), (c + 1).to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
