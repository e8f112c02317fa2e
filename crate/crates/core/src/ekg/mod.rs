//! Enterprise knowledge graph: enterprises with attributes and lawsuits,
//! persons, typed pairwise relations, typed hyperedges, labels and splits.

mod date;
mod features;
mod incidence;
mod synth;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub use date::{Date, DAYS_PER_MONTH};
pub use features::{
    extract_lawsuit_features, ExcludedLawsuit, FeatureTable, FEATURE_COUNT, FEATURE_NAMES,
    RECENT_MONTHS,
};
pub use incidence::{build_incidence, IncidenceMatrix};
pub use synth::{gen_synthetic, IndustryPlant, SynthChannels, SynthConfig};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cause {
    LoanContractDispute,
    SalesContractDispute,
    Other(String),
}

impl Cause {
    /// Rows of the cause embedding table; every `Other` shares one row.
    pub const TABLE_ROWS: usize = 3;

    /// Recognizes the two named dispute causes; anything else is kept verbatim.
    pub fn parse(raw: &str) -> Self {
        match raw
            .trim()
            .to_ascii_lowercase()
            .replace([' ', '-'], "_")
            .as_str()
        {
            "loan_contract_dispute" | "loancontractdispute" | "loan" => Cause::LoanContractDispute,
            "sales_contract_dispute" | "salescontractdispute" | "sales" => {
                Cause::SalesContractDispute
            }
            _ => Cause::Other(raw.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Cause::LoanContractDispute => "loan_contract_dispute",
            Cause::SalesContractDispute => "sales_contract_dispute",
            Cause::Other(raw) => raw,
        }
    }

    pub fn table_row(&self) -> usize {
        match self {
            Cause::LoanContractDispute => 0,
            Cause::SalesContractDispute => 1,
            Cause::Other(_) => 2,
        }
    }
}

macro_rules! closed_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn parse(raw: &str) -> Result<Self> {
                let key = raw.trim().to_ascii_lowercase().replace([' ', '-'], "_");
                $(
                    if key == $text || key == $text.replace('_', "") {
                        return Ok($name::$variant);
                    }
                )+
                Err(Error::InvalidGraph(format!(
                    concat!("unknown ", stringify!($name), " `{}`"),
                    raw
                )))
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }
    };
}

closed_enum!(CourtLevel {
    Grassroots => "grassroots",
    Intermediate => "intermediate",
    Higher => "higher",
    Supreme => "supreme",
});

closed_enum!(
    /// Litigant role combined with outcome.
    Verdict {
        PlaintiffWinner => "plaintiff_winner",
        PlaintiffLoser => "plaintiff_loser",
        DefendantWinner => "defendant_winner",
        DefendantLoser => "defendant_loser",
    }
);

closed_enum!(
    /// Pairwise relation classes of the heterogeneous graph.
    Relation {
        Manager => "manager",
        Shareholder => "shareholder",
        OtherStakeholder => "other_stakeholder",
        HolderInvestor => "holder_investor",
        Branch => "branch",
    }
);

closed_enum!(HyperedgeType {
    Industry => "industry",
    Area => "area",
    Stakeholder => "stakeholder",
});

closed_enum!(NodeKind {
    Enterprise => "enterprise",
    Person => "person",
});

impl Relation {
    /// Only holder/investor edges carry a capital-contribution weight.
    pub fn is_weighted(self) -> bool {
        self == Relation::HolderInvestor
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lawsuit {
    pub cause: Cause,
    pub court: CourtLevel,
    pub verdict: Verdict,
    pub date: Date,
}

/// Basic business attributes. Capital is in 10,000-yuan units.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Attributes {
    pub established_months: u32,
    pub registered_capital: f64,
    pub paid_in_capital: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Survive = 0,
    Bankrupt = 1,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Survive),
            1 => Some(Label::Bankrupt),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Enterprise {
    pub id: String,
    pub attrs: Attributes,
    pub lawsuits: Vec<Lawsuit>,
    pub label: Option<Label>,
    /// Bankruptcy date for failed enterprises; survivors default to the
    /// snapshot date.
    pub observation_time: Option<Date>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Person {
    pub id: String,
}

/// Index into the enterprise or person list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Enterprise(usize),
    Person(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeteroEdge {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub relation: Relation,
    pub weight: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hyperedge {
    pub kind: HyperedgeType,
    /// Enterprise indices.
    pub members: Vec<usize>,
}

/// Enterprise indices per split.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl Splits {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnterpriseKg {
    pub enterprises: Vec<Enterprise>,
    pub persons: Vec<Person>,
    pub edges: Vec<HeteroEdge>,
    pub hyperedges: Vec<Hyperedge>,
    pub splits: Splits,
    pub snapshot_date: Date,
}

/// Earliest lawsuit date accepted by [`EnterpriseKg::validate`].
pub fn earliest_lawsuit_date() -> Date {
    Date::from_ymd(2000, 1, 1).expect("valid date")
}

impl EnterpriseKg {
    pub fn enterprise_count(&self) -> usize {
        self.enterprises.len()
    }

    /// Enterprises followed by persons.
    pub fn node_count(&self) -> usize {
        self.enterprises.len() + self.persons.len()
    }

    /// Position of a node in the enterprises-then-persons ordering.
    pub fn global_index(&self, node: NodeRef) -> usize {
        match node {
            NodeRef::Enterprise(i) => i,
            NodeRef::Person(p) => self.enterprises.len() + p,
        }
    }

    pub fn node_kind(&self, global: usize) -> NodeKind {
        if global < self.enterprises.len() {
            NodeKind::Enterprise
        } else {
            NodeKind::Person
        }
    }

    pub fn observation_date(&self, enterprise: usize) -> Date {
        self.enterprises[enterprise]
            .observation_time
            .unwrap_or(self.snapshot_date)
    }

    pub fn hyperedge_types(&self) -> Vec<HyperedgeType> {
        HyperedgeType::ALL
            .iter()
            .copied()
            .filter(|t| self.hyperedges.iter().any(|h| h.kind == *t))
            .collect()
    }

    pub fn relations(&self) -> Vec<Relation> {
        Relation::ALL
            .iter()
            .copied()
            .filter(|r| self.edges.iter().any(|e| e.relation == *r))
            .collect()
    }

    /// Checks every structural invariant of the graph.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidGraph(msg));
        let mut ids = BTreeSet::new();
        for e in &self.enterprises {
            if !ids.insert(e.id.as_str()) {
                return invalid(format!("duplicate node id `{}`", e.id));
            }
            let a = &e.attrs;
            for (name, v) in [
                ("registered_capital", a.registered_capital),
                ("paid_in_capital", a.paid_in_capital),
            ] {
                if !v.is_finite() || v < 0.0 {
                    return invalid(format!(
                        "enterprise `{}`: {name} must be finite and >= 0",
                        e.id
                    ));
                }
            }
            for l in &e.lawsuits {
                if l.date < earliest_lawsuit_date() || l.date > self.snapshot_date {
                    return invalid(format!(
                        "enterprise `{}`: lawsuit date {} outside [2000-01-01, {}]",
                        e.id, l.date, self.snapshot_date
                    ));
                }
            }
        }
        for p in &self.persons {
            if !ids.insert(p.id.as_str()) {
                return invalid(format!("duplicate node id `{}`", p.id));
            }
        }
        let in_range = |n: NodeRef| match n {
            NodeRef::Enterprise(i) => i < self.enterprises.len(),
            NodeRef::Person(p) => p < self.persons.len(),
        };
        for (k, edge) in self.edges.iter().enumerate() {
            if !in_range(edge.src) || !in_range(edge.dst) {
                return invalid(format!("edge {k} references a missing node"));
            }
            match (edge.relation.is_weighted(), edge.weight) {
                (true, None) => {
                    return invalid(format!("edge {k}: holder_investor edge without weight"))
                }
                (true, Some(w)) if !(w.is_finite() && w > 0.0) => {
                    return invalid(format!("edge {k}: weight {w} must be positive"))
                }
                (false, Some(_)) => {
                    return invalid(format!(
                        "edge {k}: {} edges are unweighted",
                        edge.relation.as_str()
                    ))
                }
                _ => {}
            }
        }
        for (k, h) in self.hyperedges.iter().enumerate() {
            if h.members.is_empty() {
                return invalid(format!("hyperedge {k} has no members"));
            }
            if h.members.iter().any(|&m| m >= self.enterprises.len()) {
                return invalid(format!("hyperedge {k} has a non-enterprise member"));
            }
        }
        let mut seen = BTreeSet::new();
        for (name, split) in [
            ("train", &self.splits.train),
            ("val", &self.splits.val),
            ("test", &self.splits.test),
        ] {
            for &i in split {
                if i >= self.enterprises.len() {
                    return invalid(format!("{name} split references a missing enterprise"));
                }
                if self.enterprises[i].label.is_none() {
                    return invalid(format!(
                        "{name} split contains unlabeled enterprise `{}`",
                        self.enterprises[i].id
                    ));
                }
                if !seen.insert(i) {
                    return invalid(format!(
                        "enterprise `{}` appears in more than one split",
                        self.enterprises[i].id
                    ));
                }
            }
        }
        Ok(())
    }
}
