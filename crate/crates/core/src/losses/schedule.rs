use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LossTerm {
    CartesianDiceBce,
    PolarDiceBce,
    Rim,
    ShapeDistribution,
    ShapeRadii,
    Smoothness,
    Consistency,
}

impl LossTerm {
    pub const ALL: [LossTerm; 7] = [
        LossTerm::CartesianDiceBce,
        LossTerm::PolarDiceBce,
        LossTerm::Rim,
        LossTerm::ShapeDistribution,
        LossTerm::ShapeRadii,
        LossTerm::Smoothness,
        LossTerm::Consistency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::CartesianDiceBce => "cartesian",
            LossTerm::PolarDiceBce => "polar",
            LossTerm::Rim => "rim",
            LossTerm::ShapeDistribution => "shape_ce",
            LossTerm::ShapeRadii => "shape_radii",
            LossTerm::Smoothness => "smoothness",
            LossTerm::Consistency => "consistency",
        }
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossTerm::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown loss term '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermSchedule {
    pub term: LossTerm,
    pub weight: f64,
    pub activation_epoch: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSchedule {
    terms: Vec<TermSchedule>,
}

impl Default for LossSchedule {
    fn default() -> Self {
        use LossTerm::*;
        let rows = [
            (CartesianDiceBce, 1.0, 0),
            (PolarDiceBce, 0.7, 0),
            (Rim, 0.5, 0),
            (ShapeDistribution, 0.3, 20),
            (ShapeRadii, 0.5, 20),
            (Smoothness, 0.05, 20),
            (Consistency, 0.3, 30),
        ];
        Self {
            terms: rows
                .into_iter()
                .map(|(term, weight, activation_epoch)| TermSchedule { term, weight, activation_epoch })
                .collect(),
        }
    }
}

impl LossSchedule {
    pub fn terms(&self) -> &[TermSchedule] {
        &self.terms
    }

    pub fn get(&self, term: LossTerm) -> &TermSchedule {
        self.terms.iter().find(|t| t.term == term).expect("schedule holds every term")
    }

    pub fn set_weight(&mut self, term: LossTerm, weight: f64) -> Result<()> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight for {term} must be >= 0, got {weight}")));
        }
        self.entry(term).weight = weight;
        Ok(())
    }

    pub fn set_epoch(&mut self, term: LossTerm, epoch: u32) {
        self.entry(term).activation_epoch = epoch;
    }

    fn entry(&mut self, term: LossTerm) -> &mut TermSchedule {
        self.terms.iter_mut().find(|t| t.term == term).expect("schedule holds every term")
    }
}

/// Effective weight of every term at `epoch`: its weight once active, zero before.
pub fn schedule_weights(epoch: u32, schedule: &LossSchedule) -> Vec<(LossTerm, f64)> {
    schedule
        .terms
        .iter()
        .map(|t| (t.term, if epoch >= t.activation_epoch { t.weight } else { 0.0 }))
        .collect()
}

/// Per-term values with their effective weights and the weighted total.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub epoch: u32,
    pub rows: Vec<(LossTerm, f64, f64)>,
    pub total: f64,
}

impl LossReport {
    /// `values` may omit terms; omitted or inactive terms contribute nothing.
    pub fn new(epoch: u32, schedule: &LossSchedule, values: &[(LossTerm, f64)]) -> Result<Self> {
        let mut rows = Vec::new();
        let mut total = 0.0;
        for (term, weight) in schedule_weights(epoch, schedule) {
            let Some(&(_, value)) = values.iter().find(|(t, _)| *t == term) else {
                continue;
            };
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("loss term {term}")));
            }
            if weight > 0.0 {
                total += weight * value;
            }
            rows.push((term, weight, value));
        }
        Ok(Self { epoch, rows, total })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,weight,value,weighted\n");
        for (term, weight, value) in &self.rows {
            out.push_str(&format!(
                "{term},{},{},{}\n",
                crate::io::fmt_sig(*weight),
                crate::io::fmt_sig(*value),
                crate::io::fmt_sig(weight * value)
            ));
        }
        out.push_str(&format!("total,,,{}\n", crate::io::fmt_sig(self.total)));
        out
    }
}
