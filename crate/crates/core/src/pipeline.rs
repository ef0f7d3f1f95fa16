//! End-to-end run: normalize, solve the LP, flush, round, map back.

use std::time::Instant;

use num_traits::Zero;
use serde::Serialize;

use crate::decomposition::{attach_leaves, flush_filter, validate, TreeDecomposition};
use crate::error::{Error, Result};
use crate::flow::solve_lp;
use crate::instance::{normalize_to_matching, Instance};
use crate::rational::{floor_int, q, qi, qu, serde_q, Q};
use crate::rounding::{default_small_graph_oracle, ksum_round, GuaranteeLedger, Mode, OracleProfile};
use crate::routing::{FractionalRouting, IntegralRouting};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub epsilon: Q,
    pub mode: Mode,
    /// Overrides for the decomposition's k and p.
    pub k: Option<usize>,
    pub p: Option<usize>,
    /// `small:<q>`; defaults to `small:<p+1>`.
    pub oracle: Option<String>,
    /// Extra check on the final routing.
    pub congestion_cap: Option<Q>,
    /// Report `ms = 0` so identical runs give identical bytes.
    pub omit_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epsilon: q(1, 20),
            mode: Mode::Treewidth,
            k: None,
            p: None,
            oracle: None,
            congestion_cap: None,
            omit_timing: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    #[serde(with = "serde_q")]
    pub fractional: Q,
    pub routed: usize,
    #[serde(with = "serde_q")]
    pub congestion: Q,
    #[serde(with = "serde_q")]
    pub gamma: Q,
    pub satisfied: bool,
    pub ledger: GuaranteeLedger,
    pub ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    /// Routing of the raw demand pairs on the input graph.
    pub routing: IntegralRouting,
    /// LP solution on the normalized instance.
    pub fractional: FractionalRouting,
    /// Congestion bound of the mode.
    pub bound: Q,
}

pub fn parse_oracle(spec: &str) -> Result<OracleProfile> {
    let Some(rest) = spec.strip_prefix("small:") else {
        return Err(Error::invalid(format!("unknown oracle {spec:?}; expected small:<q>")));
    };
    let q: usize = rest
        .parse()
        .map_err(|_| Error::invalid(format!("oracle size {rest:?} is not an integer")))?;
    default_small_graph_oracle(q)
}

pub fn check_epsilon(eps: &Q) -> Result<()> {
    if eps <= &Q::zero() || eps > &q(1, 4) {
        return Err(Error::invalid("epsilon must lie in (0, 1/4]"));
    }
    Ok(())
}

/// Runs LP → flush → rounding on an instance with a decomposition of its
/// graph. Demand endpoints get fresh leaf terminals first; their bags hang
/// below a bag holding the endpoint.
pub fn run_pipeline(instance: &Instance, decomp: &TreeDecomposition, config: &RunConfig) -> Result<RunOutput> {
    let start = Instant::now();
    check_epsilon(&config.epsilon).map_err(|e| e.at("config"))?;
    validate(decomp, &instance.graph, None)
        .into_result()
        .map_err(|e| e.at("decomposition"))?;
    let norm = normalize_to_matching(&instance.graph, &instance.demands).map_err(|e| e.at("normalize"))?;
    let inst = &norm.instance;
    let leaves: Vec<_> = norm
        .raw
        .iter()
        .enumerate()
        .flat_map(|(h, raw)| {
            let d = inst.demand(h);
            [(d.s, raw.s), (d.t, raw.t)]
        })
        .collect();
    let mut d = attach_leaves(decomp, &leaves).map_err(|e| e.at("decomposition"))?;
    let k = config.k.unwrap_or(d.k);
    let p = config.p.unwrap_or(d.p).max(k);
    d.k = k;
    d.p = p;

    let oracle = match &config.oracle {
        Some(s) => parse_oracle(s),
        None => default_small_graph_oracle(p + 1),
    }
    .map_err(|e| e.at("config"))?;

    let lp = solve_lp(inst, &config.epsilon).map_err(|e| e.at("lp"))?;
    let (flushed, _) = flush_filter(&lp, &d, inst.graph(), inst.demands());
    let (rounded, ledger) = ksum_round(inst, &flushed, &d, k, p, &oracle, config.mode).map_err(|e| e.at("round"))?;
    let bound = rounded.bound.clone().unwrap_or_else(|| qi(2));
    let raw = norm.to_raw(&rounded);
    raw.validate_on(&instance.graph, &instance.demands, Some(&bound))
        .map_err(|e| Error::Guarantee(format!("raw routing fails its own bound: {e}")).at("map-back"))?;
    if let Some(cap) = &config.congestion_cap {
        raw.validate_on(&instance.graph, &instance.demands, Some(cap))
            .map_err(|e| e.at("congestion-cap"))?;
    }
    let congestion = if raw.paths.is_empty() {
        Q::zero()
    } else {
        raw.congestion(&instance.graph)?
    };
    let gamma = ledger.root().map(|r| r.gamma.clone()).unwrap_or_else(Q::zero);
    let satisfied = qu(raw.routed() as u64) >= Q::from_integer(floor_int(&gamma)) && congestion <= bound;
    let ms = if config.omit_timing {
        0
    } else {
        start.elapsed().as_millis() as u64
    };
    Ok(RunOutput {
        report: Report {
            fractional: lp.value(),
            routed: raw.routed(),
            congestion,
            gamma,
            satisfied,
            ledger,
            ms,
        },
        routing: raw,
        fractional: lp,
        bound,
    })
}
