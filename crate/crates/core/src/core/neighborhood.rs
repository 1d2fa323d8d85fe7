//! Neighborhoods of lexicographic predecessors used to localize each
//! conditional likelihood.
//!
//! An observation `(u, n)` is preceded by `(v, m)` when `m < n`, or `m == n`
//! and `v < u`. Members falling outside the unit/time box are dropped rather
//! than wrapped; spatial wraparound belongs to the model, not the neighborhood.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Neighborhood {
    /// `{(u, n-1), ..., (u, n-k)}`.
    CoLocatedLags(usize),
    /// Members `(u + du, n + dn)` for each offset `(du, dn)`.
    Offsets(Vec<(i64, i64)>),
    /// Arbitrary per-observation membership, keyed by `(u, n)`.
    Explicit(BTreeMap<(usize, usize), Vec<(usize, usize)>>),
}

fn precedes(member: (usize, usize), target: (usize, usize)) -> bool {
    let ((v, m), (u, n)) = (member, target);
    m < n || (m == n && v < u)
}

impl Neighborhood {
    pub fn empty() -> Self {
        Neighborhood::Offsets(Vec::new())
    }

    /// `{(u-1, n), ..., (u-spatial, n), (u, n-1), ..., (u, n-lags)}`.
    pub fn previous_units_and_lags(spatial: usize, lags: usize) -> Self {
        let mut offsets: Vec<(i64, i64)> = (1..=spatial as i64).map(|d| (-d, 0)).collect();
        offsets.extend((1..=lags as i64).map(|d| (0, -d)));
        Neighborhood::Offsets(offsets)
    }

    /// Checks that every offset or explicit member is a strict predecessor.
    pub fn validate(&self) -> Result<()> {
        match self {
            Neighborhood::CoLocatedLags(_) => Ok(()),
            Neighborhood::Offsets(offsets) => {
                for &(du, dn) in offsets {
                    if !(dn < 0 || (dn == 0 && du < 0)) {
                        return Err(Error::config(format!(
                            "offset ({du}, {dn}) is not a lexicographic predecessor"
                        )));
                    }
                }
                Ok(())
            }
            Neighborhood::Explicit(map) => {
                for (&target, members) in map {
                    if let Some(bad) = members.iter().find(|&&m| !precedes(m, target)) {
                        return Err(Error::config(format!(
                            "member {bad:?} does not precede {target:?}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Resolved members of the neighborhood of `(u, n)`, ordered by time then unit.
    pub fn resolve(
        &self,
        u: usize,
        n: usize,
        n_units: usize,
        n_times: usize,
    ) -> Result<Vec<(usize, usize)>> {
        if u >= n_units || n >= n_times {
            return Err(Error::config(format!(
                "observation ({u}, {n}) outside {n_units} units x {n_times} times"
            )));
        }
        let mut members: Vec<(usize, usize)> = match self {
            Neighborhood::CoLocatedLags(k) => (1..=*k)
                .filter(|&lag| lag <= n)
                .map(|lag| (u, n - lag))
                .collect(),
            Neighborhood::Offsets(offsets) => {
                self.validate()?;
                offsets
                    .iter()
                    .filter_map(|&(du, dn)| {
                        let v = u as i64 + du;
                        let m = n as i64 + dn;
                        (v >= 0 && v < n_units as i64 && m >= 0).then_some((v as usize, m as usize))
                    })
                    .collect()
            }
            Neighborhood::Explicit(map) => {
                let members = map.get(&(u, n)).cloned().unwrap_or_default();
                if let Some(bad) = members.iter().find(|&&m| !precedes(m, (u, n))) {
                    return Err(Error::config(format!(
                        "member {bad:?} does not precede {:?}",
                        (u, n)
                    )));
                }
                members
                    .into_iter()
                    .filter(|&(v, _)| v < n_units)
                    .collect()
            }
        };
        members.sort_by_key(|&(v, m)| (m, v));
        members.dedup();
        Ok(members)
    }

    pub fn tag(&self) -> String {
        match self {
            Neighborhood::CoLocatedLags(k) => format!("lags{k}"),
            Neighborhood::Offsets(o) if o.is_empty() => "none".to_string(),
            Neighborhood::Offsets(o) => {
                let parts: Vec<String> = o.iter().map(|(du, dn)| format!("{du}:{dn}")).collect();
                format!("offsets[{}]", parts.join(";"))
            }
            Neighborhood::Explicit(_) => "explicit".to_string(),
        }
    }
}

/// Members of one neighborhood sharing the same temporal lag.
#[derive(Debug, Clone, PartialEq)]
pub struct LagGroup {
    pub lag: usize,
    pub units: Vec<usize>,
}

/// Every neighborhood of a `U x N` problem, resolved once and grouped by lag.
///
/// Groups are stored oldest first, so iterating them walks forward in time and
/// the lag-zero group (if any) comes last.
#[derive(Debug, Clone)]
pub struct ResolvedNeighborhoods {
    n_units: usize,
    n_times: usize,
    groups: Vec<Vec<LagGroup>>,
    max_lag: usize,
}

impl ResolvedNeighborhoods {
    pub fn new(nb: &Neighborhood, n_units: usize, n_times: usize) -> Result<Self> {
        nb.validate()?;
        let mut groups = Vec::with_capacity(n_units * n_times);
        let mut max_lag = 0;
        for n in 0..n_times {
            for u in 0..n_units {
                let members = nb.resolve(u, n, n_units, n_times)?;
                let g = group_by_lag(&members, n);
                if let Some(first) = g.first() {
                    max_lag = max_lag.max(first.lag);
                }
                groups.push(g);
            }
        }
        Ok(Self {
            n_units,
            n_times,
            groups,
            max_lag,
        })
    }

    /// Lag groups of the neighborhood of `(u, n)`.
    pub fn groups(&self, u: usize, n: usize) -> &[LagGroup] {
        &self.groups[n * self.n_units + u]
    }

    /// Group of `(u, n)` whose members are observed at time `n - lag`.
    pub fn group_at_lag(&self, u: usize, n: usize, lag: usize) -> Option<&LagGroup> {
        self.groups(u, n).iter().find(|g| g.lag == lag)
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }
}

pub(crate) fn group_by_lag(members: &[(usize, usize)], n: usize) -> Vec<LagGroup> {
    let mut groups: Vec<LagGroup> = Vec::new();
    for &(v, m) in members {
        let lag = n - m;
        match groups.last_mut() {
            Some(g) if g.lag == lag => g.units.push(v),
            _ => groups.push(LagGroup {
                lag,
                units: vec![v],
            }),
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn colocated_lags_examples() {
        let nb = Neighborhood::CoLocatedLags(2);
        // one-based (3, 5) -> [(3,3), (3,4)]
        assert_eq!(nb.resolve(2, 4, 10, 10).unwrap(), vec![(2, 2), (2, 3)]);
        assert!(nb.resolve(0, 0, 10, 10).unwrap().is_empty());
    }

    #[test]
    fn spatial_and_lag_offsets_truncate_at_boundary() {
        let nb = Neighborhood::previous_units_and_lags(2, 2);
        // one-based (3, 2) -> [(3,1), (1,2), (2,2)]
        assert_eq!(nb.resolve(2, 1, 10, 5).unwrap(), vec![(2, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn explicit_rejects_non_predecessor() {
        let mut map = BTreeMap::new();
        map.insert((1, 1), vec![(2, 1)]);
        let nb = Neighborhood::Explicit(map);
        assert!(nb.validate().is_err());
        assert!(nb.resolve(1, 1, 4, 4).is_err());
    }

    #[test]
    fn offsets_reject_future_members() {
        assert!(Neighborhood::Offsets(vec![(1, 0)]).validate().is_err());
        assert!(Neighborhood::Offsets(vec![(0, 0)]).validate().is_err());
        assert!(Neighborhood::Offsets(vec![(5, -1)]).validate().is_ok());
    }

    #[test]
    fn grouping_orders_oldest_first() {
        let nb = Neighborhood::previous_units_and_lags(2, 2);
        let r = ResolvedNeighborhoods::new(&nb, 5, 4).unwrap();
        assert_eq!(r.max_lag(), 2);
        let g = r.groups(3, 3);
        assert_eq!(g.iter().map(|g| g.lag).collect::<Vec<_>>(), vec![2, 1, 0]);
        assert_eq!(g[2].units, vec![1, 2]);
    }

    proptest! {
        #[test]
        fn resolved_members_are_predecessors(
            offsets in prop::collection::vec((-4i64..=4, -4i64..=0), 0..8),
            u in 0usize..6, n in 0usize..6,
        ) {
            let offsets: Vec<_> = offsets.into_iter()
                .filter(|&(du, dn)| dn < 0 || (dn == 0 && du < 0))
                .collect();
            let nb = Neighborhood::Offsets(offsets);
            let members = nb.resolve(u, n, 6, 6).unwrap();
            for w in members.windows(2) {
                prop_assert!((w[0].1, w[0].0) < (w[1].1, w[1].0));
            }
            for m in members {
                prop_assert!(precedes(m, (u, n)));
                prop_assert!(m.0 < 6);
            }
        }
    }
}
