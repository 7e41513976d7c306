use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ledger::{LedgerRecord, Outcome, Phase};
use crate::validator::{executable_rate, ValidationReport};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub attempted: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub rejected_by_reason: BTreeMap<String, u64>,
    /// Rejected attempts that were retried, by reason code.
    pub retries_by_reason: BTreeMap<String, u64>,
    pub explorations_accepted: u64,
    pub explorations_rejected: u64,
    pub distinct_domains: u64,
    pub distinct_templates: u64,
    pub executable: u64,
    pub validated: u64,
    /// Three decimals; absent when nothing reached validation.
    pub executable_rate: Option<String>,
    pub llm_calls: BTreeMap<Phase, u64>,
}

/// Aggregates one run. Sample counts come from terminal ledger records;
/// domains and templates are counted over accepted samples.
pub fn compute_stats(ledger: &[LedgerRecord], reports: &[ValidationReport]) -> RunStats {
    let mut s = RunStats::default();
    let mut domains = BTreeSet::new();
    let mut templates = BTreeSet::new();
    for r in ledger {
        if !r.is_terminal() {
            if r.outcome == Outcome::Retry {
                *s.retries_by_reason.entry(reason(r)).or_default() += 1;
            }
            continue;
        }
        *s.llm_calls.entry(r.phase).or_default() += u64::from(r.llm_calls);
        match (r.phase, r.outcome) {
            (Phase::Explore, Outcome::Accept) => s.explorations_accepted += 1,
            (Phase::Explore, _) => s.explorations_rejected += 1,
            (Phase::Generate, Outcome::Accept) => {
                s.accepted += 1;
                domains.insert(r.domain.to_lowercase());
                templates.insert(r.template_id.clone());
            }
            (Phase::Generate, _) => {
                s.rejected += 1;
                *s.rejected_by_reason.entry(reason(r)).or_default() += 1;
            }
        }
    }
    s.attempted = s.accepted + s.rejected;
    s.distinct_domains = domains.len() as u64;
    s.distinct_templates = templates.len() as u64;
    if let Ok(rate) = executable_rate(reports) {
        s.executable = rate.numerator;
        s.validated = rate.denominator;
        s.executable_rate = Some(rate.to_string());
    }
    s
}

fn reason(r: &LedgerRecord) -> String {
    r.reason.clone().unwrap_or_else(|| "unspecified".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Step;

    fn sample(domain: &str, outcome: Outcome, reason: Option<&str>) -> LedgerRecord {
        LedgerRecord {
            phase: Phase::Generate,
            round: 0,
            sample_id: "s".into(),
            step: Step::Sample,
            template_id: format!("t-{domain}"),
            domain: domain.into(),
            outcome,
            reason: reason.map(Into::into),
            detail: None,
            llm_calls: 3,
        }
    }

    #[test]
    fn ten_accepts_two_rejects() {
        let mut ledger: Vec<_> = (0..10).map(|i| sample(&format!("d{}", i % 4), Outcome::Accept, None)).collect();
        ledger.push(sample("x", Outcome::Reject, Some("unexecutable")));
        ledger.push(sample("x", Outcome::Reject, Some("unexecutable")));
        let mut retry = sample("x", Outcome::Retry, Some("parse"));
        retry.step = Step::Sql;
        ledger.push(retry);
        let s = compute_stats(&ledger, &[]);
        assert_eq!(s.attempted, 12);
        assert_eq!((s.accepted, s.rejected), (10, 2));
        assert_eq!(s.rejected_by_reason["unexecutable"], 2);
        assert_eq!(s.retries_by_reason["parse"], 1);
        assert_eq!(s.distinct_domains, 4);
        assert_eq!(s.llm_calls[&Phase::Generate], 36);
        assert_eq!(s.executable_rate, None);
    }

    #[test]
    fn distinct_domains() {
        let ledger = ["a", "b", "A"].map(|d| sample(d, Outcome::Accept, None));
        assert_eq!(compute_stats(&ledger, &[]).distinct_domains, 2);
    }
}
