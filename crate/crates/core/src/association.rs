//! Serving-link selection for the typical user.
//!
//! The direct candidate is the nearest LoS BS. The cascaded candidate goes
//! through the nearest LoS RIS and a greedily chosen NLoS BS (see
//! [`GreedyTarget`]). The user then takes whichever has the larger average
//! channel gain, `d^-alpha M_T` against `eta^-alpha M_T N_R^2`.

use serde::{Deserialize, Serialize};

use crate::distributions::{analytic_association, AssociationProbabilities};
use crate::error::Result;
use crate::geometry::NetworkRealization;
use crate::params::{GreedyTarget, ScenarioParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Direct,
    Cascaded,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ServingLink {
    Direct {
        bs: usize,
        d_bu: f64,
    },
    Cascaded {
        bs: usize,
        ris: usize,
        d_br: f64,
        d_ru: f64,
        /// `d_br * d_ru`.
        eta: f64,
    },
    None,
}

impl ServingLink {
    pub fn kind(&self) -> LinkKind {
        match self {
            ServingLink::Direct { .. } => LinkKind::Direct,
            ServingLink::Cascaded { .. } => LinkKind::Cascaded,
            ServingLink::None => LinkKind::None,
        }
    }

    pub fn bs_index(&self) -> Option<usize> {
        match *self {
            ServingLink::Direct { bs, .. } | ServingLink::Cascaded { bs, .. } => Some(bs),
            ServingLink::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadedCandidate {
    pub bs: usize,
    pub ris: usize,
    pub d_br: f64,
    pub d_ru: f64,
}

impl CascadedCandidate {
    pub fn eta(&self) -> f64 {
        self.d_br * self.d_ru
    }
}

/// Index of the minimum of `key` over the items passing `keep`; ties go to
/// the lowest index.
fn argmin_by<T>(
    items: &[T],
    keep: impl Fn(usize) -> bool,
    key: impl Fn(&T) -> f64,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, it) in items.iter().enumerate() {
        if !keep(i) {
            continue;
        }
        let k = key(it);
        if best.is_none_or(|(_, b)| k < b) {
            best = Some((i, k));
        }
    }
    best
}

/// Nearest LoS BS and its distance to the user.
pub fn candidate_direct(real: &NetworkRealization) -> Option<(usize, f64)> {
    argmin_by(&real.bs, |i| real.bs_los[i], |p| p.norm())
}

pub fn nearest_los_ris(real: &NetworkRealization) -> Option<(usize, f64)> {
    argmin_by(&real.ris, |i| real.ris_los[i], |p| p.norm())
}

/// Nearest LoS RIS plus the greedily selected NLoS BS behind it.
pub fn candidate_cascaded(
    real: &NetworkRealization,
    target: GreedyTarget,
) -> Option<CascadedCandidate> {
    let (ris, d_ru) = nearest_los_ris(real)?;
    let ris_pos = real.ris[ris];
    let (bs, _) = match target {
        GreedyTarget::User => argmin_by(&real.bs, |i| !real.bs_los[i], |p| p.norm())?,
        GreedyTarget::Ris => argmin_by(&real.bs, |i| !real.bs_los[i], |p| p.distance(&ris_pos))?,
    };
    Some(CascadedCandidate {
        bs,
        ris,
        d_br: real.bs[bs].distance(&ris_pos),
        d_ru,
    })
}

/// Direct wins iff `d_bu^-alpha >= N_R^2 eta^-alpha`; exact ties go to the
/// direct link.
pub fn direct_wins(d_bu: f64, eta: f64, params: &ScenarioParams) -> bool {
    let n = params.n_r_elems as f64;
    d_bu.powf(-params.alpha) >= n * n * eta.powf(-params.alpha)
}

pub fn associate(real: &NetworkRealization, params: &ScenarioParams) -> ServingLink {
    let direct = candidate_direct(real);
    let cascaded = candidate_cascaded(real, params.greedy_target);
    match (direct, cascaded) {
        (None, None) => ServingLink::None,
        (Some((_, d_bu)), Some(c)) if !direct_wins(d_bu, c.eta(), params) => cascaded_link(c),
        (Some((bs, d_bu)), _) => ServingLink::Direct { bs, d_bu },
        (None, Some(c)) => cascaded_link(c),
    }
}

fn cascaded_link(c: CascadedCandidate) -> ServingLink {
    ServingLink::Cascaded {
        bs: c.bs,
        ris: c.ris,
        d_br: c.d_br,
        d_ru: c.d_ru,
        eta: c.eta(),
    }
}

/// Candidate link lengths of one drop; `f64::INFINITY` marks a missing
/// candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkDistances {
    pub los_bs: f64,
    /// Nearest NLoS BS, reported only when some LoS RIS exists.
    pub vlos_bs: f64,
    pub cascaded: f64,
}

pub fn link_distances(real: &NetworkRealization, params: &ScenarioParams) -> LinkDistances {
    let los_bs = candidate_direct(real).map_or(f64::INFINITY, |(_, d)| d);
    let vlos_bs = match nearest_los_ris(real) {
        Some(_) => argmin_by(&real.bs, |i| !real.bs_los[i], |p| p.norm()).map_or(f64::INFINITY, |(_, d)| d),
        None => f64::INFINITY,
    };
    let cascaded = candidate_cascaded(real, params.greedy_target).map_or(f64::INFINITY, |c| c.eta());
    LinkDistances { los_bs, vlos_bs, cascaded }
}

/// Analytic association probabilities, integrated over the nearest LoS BS
/// distance and the cascaded length law.
pub fn association_probabilities(params: &ScenarioParams) -> Result<AssociationProbabilities> {
    analytic_association(params)
}
