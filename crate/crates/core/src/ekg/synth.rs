//! Planted-signal synthetic graphs.
//!
//! Every enterprise gets a latent risk `xi ~ N(0, 1)`. Three channels shape
//! the data:
//!
//! * intra: `xi` enters the label score and drives attributes and lawsuits
//! * hyper, in one of two forms:
//!   - [`IndustryPlant::Baseline`] (default): each industry has a baseline `b`
//!     added to its members' feature driver, `f = xi + b`. The baseline says
//!     nothing about the label, so an enterprise is only judged correctly
//!     relative to its industry peers, which the industry hyperedges reveal
//!   - [`IndustryPlant::Distress`]: half the industries are distressed,
//!     `d = +-1`; `d` enters the label score and shifts member features by
//!     `industry_spread * d / 3`
//! * contagion: the mean driver `f` of holder/investor neighbors enters the
//!   label score
//!
//! The label components are standardized and summed into `S`, and the label
//! is `s * S + (1 - s) * noise > 0` for signal strength `s`. Features are
//! drawn from their own stream relative to each enterprise's observation
//! time, so at `s = 0` they carry no information about the label.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    Attributes, Cause, CourtLevel, Date, Enterprise, EnterpriseKg, HeteroEdge, Hyperedge,
    HyperedgeType, Label, Lawsuit, NodeRef, Person, Relation, Splits, Verdict,
};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{normal, poisson, stream, uniform, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthChannels {
    pub intra: bool,
    pub hyper: bool,
    pub contagion: bool,
}

impl Default for SynthChannels {
    fn default() -> Self {
        Self {
            intra: true,
            hyper: true,
            contagion: true,
        }
    }
}

impl SynthChannels {
    pub fn intra_only() -> Self {
        Self {
            intra: true,
            hyper: false,
            contagion: false,
        }
    }
}

/// How the hyper channel is planted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IndustryPlant {
    /// Label-free industry offsets on the feature driver.
    #[default]
    Baseline,
    /// Industry-level label bias, weakly visible in member features.
    Distress,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_enterprises: usize,
    pub n_persons: usize,
    /// 0 is pure noise, 1 makes the label a deterministic function of the
    /// planted channels.
    pub signal_strength: f64,
    pub channels: SynthChannels,
    pub relations: Vec<Relation>,
    pub hyperedge_types: Vec<HyperedgeType>,
    /// Defaults to one industry per 12 enterprises, at least 2.
    pub n_industries: Option<usize>,
    /// Defaults to one area per 20 enterprises, at least 2.
    pub n_areas: Option<usize>,
    pub industry_plant: IndustryPlant,
    /// Industry baselines are spread evenly over `+-industry_spread`.
    pub industry_spread: f64,
    pub snapshot_date: Date,
}

impl SynthConfig {
    pub fn new(seed: u64, n_enterprises: usize, n_persons: usize, signal_strength: f64) -> Self {
        Self {
            seed,
            n_enterprises,
            n_persons,
            signal_strength,
            channels: SynthChannels::default(),
            relations: Relation::ALL.to_vec(),
            hyperedge_types: HyperedgeType::ALL.to_vec(),
            n_industries: None,
            n_areas: None,
            industry_plant: IndustryPlant::Baseline,
            industry_spread: 1.5,
            snapshot_date: Date::from_ymd(2021, 12, 31).expect("valid date"),
        }
    }
}

const PERSON_RELATIONS: [Relation; 3] = [
    Relation::Manager,
    Relation::Shareholder,
    Relation::OtherStakeholder,
];

/// Deterministic synthetic graph for `config`.
pub fn gen_synthetic(config: &SynthConfig) -> Result<EnterpriseKg> {
    let n = config.n_enterprises;
    if n < 10 {
        return Err(Error::Config(format!(
            "synthetic graphs need at least 10 enterprises, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&config.signal_strength) {
        return Err(Error::Config(format!(
            "signal_strength must lie in [0, 1], got {}",
            config.signal_strength
        )));
    }
    let has_rel = |r: Relation| config.relations.contains(&r);
    let has_type = |t: HyperedgeType| config.hyperedge_types.contains(&t);
    let seed = config.seed;

    // Industry partition and per-industry offsets.
    let n_ind = config.n_industries.unwrap_or((n / 12).max(2)).clamp(1, n);
    let industry_of = partition(&mut stream(seed, "synth.industry"), n, n_ind);
    let spread = if config.channels.hyper {
        config.industry_spread
    } else {
        0.0
    };
    let mut distress: Vec<f64> = (0..n_ind)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    distress.shuffle(&mut stream(seed, "synth.distress"));
    let mut baseline: Vec<f64> = match config.industry_plant {
        IndustryPlant::Baseline => (0..n_ind)
            .map(|k| {
                let step = if n_ind > 1 {
                    2.0 * k as f64 / (n_ind - 1) as f64 - 1.0
                } else {
                    0.0
                };
                spread * step
            })
            .collect(),
        IndustryPlant::Distress => distress.iter().map(|d| spread * d / 3.0).collect(),
    };
    if config.industry_plant == IndustryPlant::Baseline {
        baseline.shuffle(&mut stream(seed, "synth.baseline"));
    }
    let n_area = config.n_areas.unwrap_or((n / 20).max(2)).clamp(1, n);
    let area_of = partition(&mut stream(seed, "synth.area"), n, n_area);

    // Pairwise edges.
    let mut edges = Vec::new();
    let mut rng = stream(seed, "synth.edges");
    let mut hi_neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    if has_rel(Relation::HolderInvestor) {
        let mut pairs = BTreeSet::new();
        for investee in 0..n {
            let k = rng.random_range(1..=2usize);
            for _ in 0..k {
                let investor = other_than(&mut rng, n, investee);
                let key = (investee.min(investor), investee.max(investor));
                if !pairs.insert(key) {
                    continue;
                }
                edges.push(HeteroEdge {
                    src: NodeRef::Enterprise(investor),
                    dst: NodeRef::Enterprise(investee),
                    relation: Relation::HolderInvestor,
                    weight: Some(uniform(&mut rng, 0.05, 1.0)),
                });
                hi_neighbors[investee].push(investor);
                hi_neighbors[investor].push(investee);
            }
        }
    }
    if has_rel(Relation::Branch) {
        let mut pairs = BTreeSet::new();
        for _ in 0..(n / 8).max(1) {
            let parent = rng.random_range(0..n);
            let branch = other_than(&mut rng, n, parent);
            if pairs.insert((parent, branch)) {
                edges.push(HeteroEdge {
                    src: NodeRef::Enterprise(parent),
                    dst: NodeRef::Enterprise(branch),
                    relation: Relation::Branch,
                    weight: None,
                });
            }
        }
    }
    let person_rels: Vec<Relation> = PERSON_RELATIONS
        .into_iter()
        .filter(|r| has_rel(*r))
        .collect();
    let mut person_links: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); config.n_persons];
    if !person_rels.is_empty() {
        for (p, links) in person_links.iter_mut().enumerate() {
            let k = rng.random_range(1..=3usize);
            for _ in 0..k {
                let e = rng.random_range(0..n);
                if !links.insert(e) {
                    continue;
                }
                let relation = person_rels[rng.random_range(0..person_rels.len())];
                edges.push(HeteroEdge {
                    src: NodeRef::Person(p),
                    dst: NodeRef::Enterprise(e),
                    relation,
                    weight: None,
                });
            }
        }
    }

    // Hyperedges.
    let mut hyperedges = Vec::new();
    if has_type(HyperedgeType::Industry) {
        push_groups(
            &mut hyperedges,
            HyperedgeType::Industry,
            &industry_of,
            n_ind,
        );
    }
    if has_type(HyperedgeType::Area) {
        push_groups(&mut hyperedges, HyperedgeType::Area, &area_of, n_area);
    }
    if has_type(HyperedgeType::Stakeholder) {
        let mut seen = BTreeSet::new();
        for links in &person_links {
            if links.len() >= 2 {
                let members: Vec<usize> = links.iter().copied().collect();
                if seen.insert(members.clone()) {
                    hyperedges.push(Hyperedge {
                        kind: HyperedgeType::Stakeholder,
                        members,
                    });
                }
            }
        }
    }

    // Latent risk and observed risk.
    let mut rng = stream(seed, "synth.latent");
    let xi: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let risk: Vec<f64> = (0..n).map(|i| xi[i] + baseline[industry_of[i]]).collect();

    // Label score from the enabled channels.
    let mut components: Vec<Vec<f64>> = Vec::new();
    if config.channels.intra {
        components.push(xi.clone());
    }
    if config.channels.hyper && config.industry_plant == IndustryPlant::Distress {
        components.push((0..n).map(|i| distress[industry_of[i]]).collect());
    }
    if config.channels.contagion {
        let c: Vec<f64> = hi_neighbors
            .iter()
            .map(|nb| {
                if nb.is_empty() {
                    0.0
                } else {
                    nb.iter().map(|&j| risk[j]).sum::<f64>() / nb.len() as f64
                }
            })
            .collect();
        if let Some(c) = standardize(&c) {
            components.push(c);
        }
    }
    let mut rng = stream(seed, "synth.labels");
    let s = config.signal_strength;
    let norm = math::sqrt(components.len().max(1) as f64);
    let labels: Vec<Label> = (0..n)
        .map(|i| {
            let planted: f64 = components.iter().map(|c| c[i]).sum::<f64>() / norm;
            let noise = normal(&mut rng);
            if s * planted + (1.0 - s) * noise > 0.0 {
                Label::Bankrupt
            } else {
                Label::Survive
            }
        })
        .collect();

    // Observation times: failures happen some time before the snapshot.
    let mut rng = stream(seed, "synth.observation");
    let observation: Vec<Option<Date>> = labels
        .iter()
        .map(|&label| {
            let back = rng.random_range(0..8 * 365);
            (label == Label::Bankrupt).then(|| config.snapshot_date.add_days(-back))
        })
        .collect();

    // Attributes and lawsuits, relative to each observation time.
    let mut rng = stream(seed, "synth.features");
    let mut enterprises = Vec::with_capacity(n);
    for i in 0..n {
        let obs = observation[i].unwrap_or(config.snapshot_date);
        let (attrs, lawsuits) = draw_features(&mut rng, risk[i], obs);
        enterprises.push(Enterprise {
            id: format!("e{i:04}"),
            attrs,
            lawsuits,
            label: Some(labels[i]),
            observation_time: observation[i],
        });
    }
    let persons = (0..config.n_persons)
        .map(|p| Person {
            id: format!("p{p:04}"),
        })
        .collect();

    let splits = stratified_splits(&mut stream(seed, "synth.splits"), &labels);
    let kg = EnterpriseKg {
        enterprises,
        persons,
        edges,
        hyperedges,
        splits,
        snapshot_date: config.snapshot_date,
    };
    kg.validate()?;
    Ok(kg)
}

/// Random assignment of `n` items to `k` non-empty groups.
fn partition(rng: &mut StreamRng, n: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut group = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        group[i] = pos % k;
    }
    group
}

fn push_groups(out: &mut Vec<Hyperedge>, kind: HyperedgeType, group_of: &[usize], k: usize) {
    for g in 0..k {
        let members: Vec<usize> = (0..group_of.len()).filter(|&i| group_of[i] == g).collect();
        if !members.is_empty() {
            out.push(Hyperedge { kind, members });
        }
    }
}

fn other_than(rng: &mut StreamRng, n: usize, not: usize) -> usize {
    let j = rng.random_range(0..n - 1);
    if j >= not {
        j + 1
    } else {
        j
    }
}

fn standardize(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (var > 0.0).then(|| {
        let sd = math::sqrt(var);
        values.iter().map(|v| (v - mean) / sd).collect()
    })
}

/// Attributes and lawsuits for one enterprise with observed risk `r`.
/// Polarities: riskier firms are younger and smaller, have more loan, sales,
/// grassroots and defendant-loser lawsuits, fewer old lawsuits, and their
/// recent lawsuits sit closer to the observation time.
fn draw_features(rng: &mut StreamRng, r: f64, obs: Date) -> (Attributes, Vec<Lawsuit>) {
    let t = math::tanh(r);
    let established = math::exp(math::ln(150.0) - 0.3 * r + 0.15 * normal(rng));
    let registered = math::exp(math::ln(1200.0) - 0.8 * r + 0.35 * normal(rng));
    let paid = registered * uniform(rng, 0.3, 1.0);
    let attrs = Attributes {
        established_months: math::round(established).max(1.0) as u32,
        registered_capital: registered,
        paid_in_capital: paid,
    };

    let recent = poisson(rng, 1.6 * math::exp(0.45 * r));
    let old = poisson(rng, 0.8 * math::exp(-0.5 * r));
    let mut lawsuits = Vec::with_capacity(recent + old);
    for k in 0..recent + old {
        let days = if k < recent {
            // u^(e^{0.6 r}) concentrates near 0 for risky firms.
            let u: f64 = rng.random();
            math::floor(730.0 * math::powf(u, math::exp(0.6 * r))) as i32
        } else {
            731 + rng.random_range(0..1800)
        };
        let u: f64 = rng.random();
        let loan = 0.30 + 0.12 * t;
        let sales = 0.12 + 0.06 * t;
        let cause = if u < loan {
            Cause::LoanContractDispute
        } else if u < loan + sales {
            Cause::SalesContractDispute
        } else {
            Cause::Other(String::from("other"))
        };
        let u: f64 = rng.random();
        let grassroots = 0.72 + 0.12 * t;
        let intermediate = 0.20 - 0.08 * t;
        let higher = 0.06 - 0.03 * t;
        let court = if u < grassroots {
            CourtLevel::Grassroots
        } else if u < grassroots + intermediate {
            CourtLevel::Intermediate
        } else if u < grassroots + intermediate + higher {
            CourtLevel::Higher
        } else {
            CourtLevel::Supreme
        };
        let u: f64 = rng.random();
        let loser = 0.35 + 0.25 * t;
        let winner = 0.25 - 0.18 * t;
        let rest = (1.0 - loser - winner) / 2.0;
        let verdict = if u < loser {
            Verdict::DefendantLoser
        } else if u < loser + winner {
            Verdict::PlaintiffWinner
        } else if u < loser + winner + rest {
            Verdict::PlaintiffLoser
        } else {
            Verdict::DefendantWinner
        };
        lawsuits.push(Lawsuit {
            cause,
            court,
            verdict,
            date: obs.add_days(-days),
        });
    }
    (attrs, lawsuits)
}

/// 60/20/20 split within each class.
fn stratified_splits(rng: &mut StreamRng, labels: &[Label]) -> Splits {
    let mut splits = Splits::default();
    for class in [Label::Survive, Label::Bankrupt] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let m = idx.len();
        let train = math::round(0.6 * m as f64) as usize;
        let val = (math::round(0.2 * m as f64) as usize).min(m - train);
        splits.train.extend_from_slice(&idx[..train]);
        splits.val.extend_from_slice(&idx[train..train + val]);
        splits.test.extend_from_slice(&idx[train + val..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    splits
}

impl core::fmt::Display for SynthChannels {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut parts = Vec::new();
        for (on, name) in [
            (self.intra, "intra"),
            (self.hyper, "hyper"),
            (self.contagion, "contagion"),
        ] {
            if on {
                parts.push(name.to_string());
            }
        }
        write!(f, "{}", parts.join("+"))
    }
}
