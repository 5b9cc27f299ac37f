use serde::Serialize;

use super::{Lattice, LocalHamiltonian};
use crate::error::{Error, Result};
use crate::operator::{normalize_sites, union, HermitianOperator};

/// Shields for the site placed at step `step` of an ordering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Shield {
    pub step: usize,
    pub site: usize,
    /// S_k: earlier sites within the shield radius.
    pub shield: Vec<usize>,
    /// S'_k = S_k ∪ {site}.
    pub extended: Vec<usize>,
    /// S²_k: earlier sites within twice the radius.
    pub doubled: Vec<usize>,
    pub doubled_extended: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ShieldPlan {
    lattice: Lattice,
    ordering: Vec<usize>,
    radius: usize,
    shields: Vec<Shield>,
}

/// Builds S_k = B_ℓ(o_k) ∩ {o_0, …, o_{k-1}} for every step of `ordering`.
pub fn build_shield_plan(
    lattice: &Lattice,
    ordering: &[usize],
    radius: usize,
    range: usize,
) -> Result<ShieldPlan> {
    if radius < range {
        return Err(Error::ShieldTooSmall { radius, range });
    }
    let n = lattice.num_sites();
    let mut seen = vec![false; n];
    for &s in ordering {
        if s >= n || seen[s] {
            return Err(Error::Ordering(format!(
                "{ordering:?} is not a permutation of 0..{n}"
            )));
        }
        seen[s] = true;
    }
    if ordering.len() != n {
        return Err(Error::Ordering(format!(
            "ordering has {} sites, lattice has {n}",
            ordering.len()
        )));
    }
    let shields = ordering
        .iter()
        .enumerate()
        .map(|(k, &site)| {
            let earlier = &ordering[..k];
            let within = |r: usize| -> Vec<usize> {
                normalize_sites(
                    &earlier
                        .iter()
                        .copied()
                        .filter(|&j| lattice.distance(j, site) <= r)
                        .collect::<Vec<_>>(),
                )
            };
            let shield = within(radius);
            let doubled = within(2 * radius);
            Shield {
                step: k,
                site,
                extended: union(&shield, &[site]),
                doubled_extended: union(&doubled, &[site]),
                shield,
                doubled,
            }
        })
        .collect();
    Ok(ShieldPlan {
        lattice: lattice.clone(),
        ordering: ordering.to_vec(),
        radius,
        shields,
    })
}

impl ShieldPlan {
    /// Sites in label order.
    pub fn consecutive(lattice: &Lattice, radius: usize, range: usize) -> Result<Self> {
        let ordering: Vec<usize> = lattice.sites().collect();
        build_shield_plan(lattice, &ordering, radius, range)
    }

    pub fn for_hamiltonian(
        h: &LocalHamiltonian,
        ordering: &[usize],
        radius: usize,
    ) -> Result<Self> {
        build_shield_plan(h.lattice(), ordering, radius, h.range())
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn shields(&self) -> &[Shield] {
        &self.shields
    }

    pub fn len(&self) -> usize {
        self.shields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shields.is_empty()
    }

    /// [k]: the first `k` sites of the ordering, ascending.
    pub fn placed(&self, k: usize) -> Vec<usize> {
        normalize_sites(&self.ordering[..k])
    }

    /// h_k = H_{[k+1]} − H_{[k]} on S'_k for every step.
    pub fn local_terms(&self, h: &LocalHamiltonian) -> Result<Vec<HermitianOperator>> {
        if h.lattice() != &self.lattice {
            return Err(Error::Lattice(
                "plan and hamiltonian use different lattices".into(),
            ));
        }
        if self.radius < h.range() {
            return Err(Error::ShieldTooSmall {
                radius: self.radius,
                range: h.range(),
            });
        }
        self.shields
            .iter()
            .map(|s| {
                let placed = union(&self.placed(s.step), &[s.site]);
                let stray = h.terms().iter().find(|t| {
                    t.sites().contains(&s.site)
                        && t.sites().iter().all(|x| placed.contains(x))
                        && !t.sites().iter().all(|x| s.extended.contains(x))
                });
                if let Some(t) = stray {
                    return Err(Error::Hamiltonian(format!(
                        "term on {:?} is not covered by the shield {:?}",
                        t.sites(),
                        s.extended
                    )));
                }
                h.terms_touching(s.site, &s.extended)
            })
            .collect()
    }
}

/// Ordering whose first block is the ball B_{ℓ/2}(i) around a site `i` whose ball
/// covers `target`, with `i` last in the block. Remaining sites follow in label order.
pub fn marginal_centered_ordering(
    lattice: &Lattice,
    target: &[usize],
    radius: usize,
) -> Result<Vec<usize>> {
    let half = radius / 2;
    if target.is_empty() {
        return Err(Error::Ordering("empty target set".into()));
    }
    if let Some(&site) = target.iter().find(|&&s| !lattice.contains(s)) {
        return Err(Error::UnknownSite {
            site,
            available: lattice.sites().collect(),
        });
    }
    let center = lattice
        .sites()
        .map(|i| {
            (
                target
                    .iter()
                    .map(|&t| lattice.distance(i, t))
                    .max()
                    .unwrap_or(0),
                i,
            )
        })
        .min()
        .filter(|&(reach, _)| reach <= half)
        .map(|(_, i)| i)
        .ok_or_else(|| Error::TargetTooLarge {
            target: target.to_vec(),
            radius: half,
        })?;
    let ball = lattice.ball(&[center], half);
    let mut ordering: Vec<usize> = ball.iter().copied().filter(|&s| s != center).collect();
    ordering.push(center);
    ordering.extend(lattice.sites().filter(|s| !ball.contains(s)));
    Ok(ordering)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Metric;

    #[test]
    fn chain_shields_with_radius_two() {
        let l = Lattice::chain(6).unwrap();
        let plan = ShieldPlan::consecutive(&l, 2, 1).unwrap();
        let s = &plan.shields()[3];
        assert_eq!(s.shield, vec![1, 2]);
        assert_eq!(s.extended, vec![1, 2, 3]);
        assert_eq!(plan.shields()[0].shield, Vec::<usize>::new());
        assert_eq!(plan.shields()[0].extended, vec![0]);
        for (k, s) in plan.shields().iter().enumerate() {
            let lo = k.saturating_sub(2);
            assert_eq!(s.shield, (lo..k).collect::<Vec<_>>());
            let lo2 = k.saturating_sub(4);
            assert_eq!(s.doubled, (lo2..k).collect::<Vec<_>>());
        }
    }

    #[test]
    fn radius_below_range_is_rejected() {
        let l = Lattice::chain(4).unwrap();
        assert!(matches!(
            ShieldPlan::consecutive(&l, 1, 2),
            Err(Error::ShieldTooSmall { .. })
        ));
        assert!(build_shield_plan(&l, &[0, 1, 1, 3], 1, 1).is_err());
        assert!(build_shield_plan(&l, &[0, 1, 2], 1, 1).is_err());
    }

    #[test]
    fn grid_shield_is_box_intersected_with_earlier_sites() {
        let l = Lattice::grid(4, 4).unwrap();
        let plan = ShieldPlan::consecutive(&l, 2, 1).unwrap();
        // site 10 = (2, 2): earlier sites within Chebyshev distance 2
        let s = &plan.shields()[10];
        let expect: Vec<usize> = (0..10usize)
            .filter(|&j| {
                let (r, c) = (j / 4, j % 4);
                r.abs_diff(2) <= 2 && c.abs_diff(2) <= 2
            })
            .collect();
        assert_eq!(s.shield, expect);
        assert_eq!(s.shield, vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn centered_ordering_in_one_dimension() {
        let l = Lattice::chain(8).unwrap();
        let o = marginal_centered_ordering(&l, &[3], 4).unwrap();
        assert_eq!(&o[..5], &[1, 2, 4, 5, 3]);
        assert_eq!(&o[5..], &[0, 6, 7]);
        assert!(marginal_centered_ordering(&l, &(0..8).collect::<Vec<_>>(), 4).is_err());
    }

    #[test]
    fn centered_ordering_in_two_dimensions() {
        let l = Lattice::grid(3, 3).unwrap();
        let o = marginal_centered_ordering(&l, &[4], 2).unwrap();
        assert_eq!(o.len(), 9);
        assert_eq!(o[8], 4);
        let m = l.with_metric(Metric::Manhattan);
        let o = marginal_centered_ordering(&m, &[4], 2).unwrap();
        assert_eq!(&o[..5], &[1, 3, 5, 7, 4]);
    }
}
