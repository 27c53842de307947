use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::defender::CONTRACT_SHARE;
use crate::error::{Error, Result};
use crate::ledger::{Ledger, Transaction};
use crate::task::{backdoor_accuracy, main_accuracy, Dataset, Model, TARGET_CLASS, TRIGGER_FEATURES};

/// One CSV row per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    #[serde(rename = "MA")]
    pub ma: f64,
    #[serde(rename = "BA")]
    pub ba: f64,
    #[serde(rename = "TPR")]
    pub tpr: f64,
    #[serde(rename = "TNR")]
    pub tnr: f64,
    #[serde(rename = "R_C")]
    pub r_c: f64,
    pub reward_benign: f64,
    pub reward_malicious: f64,
    pub n_submitted: usize,
    pub n_selected: usize,
}

pub const CSV_HEADER: &str = "round,MA,BA,TPR,TNR,R_C,reward_benign,reward_malicious,n_submitted,n_selected";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

pub fn metrics_to_csv(metrics: &[RoundMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in metrics {
        w.serialize(m).map_err(|e| Error::Output(e.to_string()))?;
    }
    if metrics.is_empty() {
        return Ok(format!("{CSV_HEADER}\n"));
    }
    let bytes = w.into_inner().map_err(|e| Error::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Output(e.to_string()))
}

pub fn metrics_from_csv(text: &str) -> Result<Vec<RoundMetrics>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<RoundMetrics>, _>>()
        .map_err(|e| Error::Output(e.to_string()))
}

pub fn metrics_to_json(metrics: &[RoundMetrics]) -> Result<String> {
    serde_json::to_string_pretty(metrics).map_err(|e| Error::Output(e.to_string()))
}

/// Writes metrics to `path` as CSV or JSON.
pub fn emit_results(metrics: &[RoundMetrics], path: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => metrics_to_csv(metrics)?,
        OutputFormat::Json => metrics_to_json(metrics)?,
    };
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

/// `(MA, BA)` of a weight vector on the test set.
pub fn evaluate_model(weights: &[f64], test: &Dataset) -> Option<(f64, f64)> {
    let model = Model::from_weights(weights.to_vec());
    let ma = main_accuracy(&model, test)?;
    let ba = backdoor_accuracy(&model, test, &TRIGGER_FEATURES, TARGET_CLASS).unwrap_or(0.0);
    Some((ma, ba))
}

/// `(TPR, TNR)` of a flagged set against the truly malicious set, over `submitted`.
/// Rates with an empty denominator are 1.
pub fn defense_rates(submitted: &BTreeSet<String>, flagged: &BTreeSet<String>, malicious: &BTreeSet<String>) -> (f64, f64) {
    let positives: Vec<&String> = submitted.iter().filter(|id| malicious.contains(*id)).collect();
    let negatives: Vec<&String> = submitted.iter().filter(|id| !malicious.contains(*id)).collect();
    let tp = positives.iter().filter(|id| flagged.contains(**id)).count();
    let tn = negatives.iter().filter(|id| !flagged.contains(**id)).count();
    let tpr = if positives.is_empty() { 1.0 } else { tp as f64 / positives.len() as f64 };
    let tnr = if negatives.is_empty() { 1.0 } else { tn as f64 / negatives.len() as f64 };
    (tpr, tnr)
}

/// Chance of guessing the order of `m` shuffled ciphers: `1/m!`.
///
/// Computed as a running product of `1/k`, which stays accurate until it
/// underflows for `m > 170`.
pub fn inference_success_probability(m: u32) -> f64 {
    (1..=m).fold(1.0, |p, k| p / k as f64)
}

/// `log10(1/m!)`, usable where the probability itself underflows.
pub fn inference_success_log10(m: u32) -> f64 {
    -(1..=m).map(|k| (k as f64).log10()).sum::<f64>()
}

/// What the harness knows that the ledger does not: who attacked and when.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub malicious_clients: BTreeSet<String>,
    pub poisoned_rounds: BTreeSet<u32>,
}

impl GroundTruth {
    /// Clients that actually submitted a poisoned update in `round`.
    pub fn malicious_in(&self, round: u32) -> BTreeSet<String> {
        if self.poisoned_rounds.contains(&round) {
            self.malicious_clients.clone()
        } else {
            BTreeSet::new()
        }
    }
}

/// Per-round metrics reconstructed from ledger contents alone (plus the
/// ground truth and the evaluation set).
pub fn replay_metrics(ledger: &Ledger, session_id: &str, truth: &GroundTruth, test: &Dataset) -> Result<Vec<RoundMetrics>> {
    let init = ledger
        .session(session_id)
        .ok_or_else(|| Error::Output(format!("session {session_id} not in ledger")))?;
    let mut owners: BTreeMap<String, String> = BTreeMap::new();
    let mut submitted: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
    let mut groups: BTreeMap<u32, (BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
    let mut rewards: BTreeMap<u32, f64> = BTreeMap::new();
    let mut out = Vec::new();
    let mut r_c = CONTRACT_SHARE * init.session_reward;
    for tx in ledger.transactions() {
        if tx.session_id() != session_id {
            continue;
        }
        match tx {
            Transaction::TT2(t) => {
                owners.insert(t.model_id.clone(), t.client_id.clone());
                submitted.entry(t.round).or_default().insert(t.client_id.clone());
            }
            Transaction::TT5(g) => {
                let to_clients = |ids: &[String]| -> BTreeSet<String> {
                    ids.iter().filter_map(|m| owners.get(m).cloned()).collect()
                };
                groups.insert(g.round, (to_clients(&g.benign_ids), to_clients(&g.malicious_ids)));
            }
            Transaction::TT4(p) => r_c = p.contract_reward,
            Transaction::TT6(r) => {
                rewards.insert(r.round, r.training_reward);
            }
            Transaction::TT7(g) if g.round >= 1 => {
                let subs = submitted.get(&g.round).cloned().unwrap_or_default();
                let (selected, flagged) = groups.get(&g.round).cloned().unwrap_or_default();
                let reward = rewards.get(&g.round).copied().unwrap_or(0.0);
                let malicious = truth.malicious_in(g.round);
                let (ma, ba) = evaluate_model(&g.global_weights, test)
                    .ok_or_else(|| Error::Output("empty test set".into()))?;
                out.push(round_row(g.round, ma, ba, &subs, &selected, &flagged, &malicious, reward, r_c));
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Assembles one metrics row from client-level sets.
#[allow(clippy::too_many_arguments)]
pub fn round_row(
    round: u32,
    ma: f64,
    ba: f64,
    submitted: &BTreeSet<String>,
    selected: &BTreeSet<String>,
    flagged: &BTreeSet<String>,
    malicious: &BTreeSet<String>,
    reward: f64,
    r_c: f64,
) -> RoundMetrics {
    let (tpr, tnr) = defense_rates(submitted, flagged, malicious);
    let mean_reward = |pick_malicious: bool| {
        let members: Vec<&String> = submitted
            .iter()
            .filter(|c| malicious.contains(*c) == pick_malicious)
            .collect();
        if members.is_empty() {
            return 0.0;
        }
        let paid = members.iter().filter(|c| selected.contains(**c)).count();
        reward * paid as f64 / members.len() as f64
    };
    RoundMetrics {
        round,
        ma,
        ba,
        tpr,
        tnr,
        r_c,
        reward_benign: mean_reward(false),
        reward_malicious: mean_reward(true),
        n_submitted: submitted.len(),
        n_selected: selected.len(),
    }
}
