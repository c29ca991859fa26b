//! Audits of the completion's guarantees on concrete inputs.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use shiftrec_core::data::Scale;
use shiftrec_core::recsys::{default_fairness_user, find_consensus_patterns};
use shiftrec_core::support::{check_support, check_support_with_budget};
use shiftrec_core::{
    fairness_probe, random_orders, verify_shift_consistency, verify_uniqueness, ConsensusPattern, ConvergenceConfig,
    Error, Method, Recommender, SparseTensor, SweepOrder,
};

use crate::error::{exit, Result};

/// Bound on completion disagreements for the shift and uniqueness audits.
pub const COMPLETION_TOLERANCE: f64 = 1e-8;
/// Bound on other users' prediction changes in the fairness audit.
pub const FAIRNESS_TOLERANCE: f64 = 1e-9;
/// Longest coordinate list copied into a report.
const LISTED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Pass,
    /// The property was measured and does not hold.
    Fail,
    /// The input does not meet the property's preconditions.
    PreconditionUnmet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub audit: String,
    pub status: AuditStatus,
    pub tolerance: Option<f64>,
    pub message: String,
    pub details: Value,
    /// Plot data, when the audit has any.
    #[serde(skip)]
    pub csv: Option<String>,
}

impl AuditReport {
    fn new(audit: &str, status: AuditStatus, tolerance: Option<f64>, message: String, details: Value) -> Self {
        AuditReport {
            audit: audit.into(),
            status,
            tolerance,
            message,
            details,
            csv: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            AuditStatus::Pass => exit::SUCCESS,
            AuditStatus::Fail => exit::PROPERTY_VIOLATION,
            AuditStatus::PreconditionUnmet => exit::DOMAIN,
        }
    }

    /// The audit's plot data, or a `field,value` listing of its scalars.
    pub fn to_csv(&self) -> String {
        if let Some(csv) = &self.csv {
            return csv.clone();
        }
        let mut out = String::from("field,value\n");
        out.push_str(&format!("audit,{}\n", self.audit));
        out.push_str(&format!("status,{}\n", status_name(self.status)));
        if let Some(tol) = self.tolerance {
            out.push_str(&format!("tolerance,{tol}\n"));
        }
        if let Value::Object(map) = &self.details {
            for (k, v) in map {
                if v.is_number() || v.is_boolean() {
                    out.push_str(&format!("{k},{v}\n"));
                }
            }
        }
        out
    }
}

fn status_name(s: AuditStatus) -> &'static str {
    match s {
        AuditStatus::Pass => "pass",
        AuditStatus::Fail => "fail",
        AuditStatus::PreconditionUnmet => "precondition_unmet",
    }
}

fn pass_or_fail(ok: bool) -> AuditStatus {
    if ok {
        AuditStatus::Pass
    } else {
        AuditStatus::Fail
    }
}

pub fn audit_support(t: &SparseTensor, budget: usize) -> AuditReport {
    let report = check_support_with_budget(t, budget);
    let message = if report.fully_supported {
        "every unknown entry has a support certificate".to_string()
    } else {
        format!(
            "{} unknown entries lack a certificate, {} searches hit the budget",
            report.unsupported.len(),
            report.inconclusive.len()
        )
    };
    let details = json!({
        "fully_supported": report.fully_supported,
        "unknown_entries": t.unknown_count(),
        "certified": report.certificates.len(),
        "unsupported": report.unsupported.len(),
        "inconclusive": report.inconclusive.len(),
        "candidate_budget": budget,
        "first_unsupported": report.unsupported.iter().take(LISTED).map(|c| c.0.clone()).collect::<Vec<_>>(),
        "first_inconclusive": report.inconclusive.iter().take(LISTED).map(|c| c.0.clone()).collect::<Vec<_>>(),
    });
    AuditReport::new("support", pass_or_fail(report.fully_supported), None, message, details)
}

/// A deviation on an input without full support is reported as an unmet
/// precondition, since consistency rests on the imputation being unique.
pub fn audit_shift_consistency(
    t: &SparseTensor,
    k: usize,
    cfg: &ConvergenceConfig,
    trials: usize,
    seed: u64,
) -> Result<AuditReport> {
    let deviation = verify_shift_consistency(t, k, cfg, trials, seed)?;
    let support = check_support(t);
    let status = match (deviation < COMPLETION_TOLERANCE, support.fully_supported) {
        (true, _) => AuditStatus::Pass,
        (false, true) => AuditStatus::Fail,
        (false, false) => AuditStatus::PreconditionUnmet,
    };
    let mut message = format!("max |T(complete(t)) - complete(T(t))| = {deviation:e} over {trials} random shifts");
    if !support.fully_supported {
        message.push_str(&format!(
            "; {} unknown entries lack support, so consistency is not guaranteed",
            support.unsupported.len() + support.inconclusive.len()
        ));
    }
    Ok(AuditReport::new(
        "shift-consistency",
        status,
        Some(COMPLETION_TOLERANCE),
        message,
        json!({
            "k": k,
            "trials": trials,
            "seed": seed,
            "max_deviation": deviation,
            "fully_supported": support.fully_supported,
        }),
    ))
}

/// Compares the default sweep order, both catalog orders and `random`
/// random permutations.
pub fn audit_uniqueness(
    t: &SparseTensor,
    k: usize,
    cfg: &ConvergenceConfig,
    random: usize,
    seed: u64,
) -> Result<AuditReport> {
    let mut orders = vec![SweepOrder::AnchorMajor, SweepOrder::Catalog, SweepOrder::ReverseCatalog];
    orders.extend(random_orders(t.shape(), k, random, seed)?);
    let report = verify_uniqueness(t, k, cfg, &orders)?;
    let agree = report.max_deviation <= COMPLETION_TOLERANCE && report.max_null_shift_residual <= COMPLETION_TOLERANCE;
    let status = match (agree, report.guaranteed) {
        (true, _) => AuditStatus::Pass,
        (false, true) => AuditStatus::Fail,
        (false, false) => AuditStatus::PreconditionUnmet,
    };
    let mut message = format!(
        "{} sweep orders, max completion deviation {:e}, max null-shift residual {:e}",
        report.orders, report.max_deviation, report.max_null_shift_residual
    );
    if !report.guaranteed {
        message.push_str(&format!(
            "; not fully supported ({} unknowns), so uniqueness is not guaranteed",
            report.unsupported
        ));
    }
    Ok(AuditReport::new(
        "uniqueness",
        status,
        Some(COMPLETION_TOLERANCE),
        message,
        serde_json::to_value(&report)?,
    ))
}

/// Checks an explicit pattern (`gamma`) or, without one, up to `limit`
/// patterns found in the data.
pub fn audit_consensus(
    t: &SparseTensor,
    axis: usize,
    gamma: Option<Vec<usize>>,
    limit: usize,
    method: Method,
    cfg: &ConvergenceConfig,
) -> Result<AuditReport> {
    let patterns = match gamma {
        Some(gamma) => match ConsensusPattern::new(t, axis, gamma) {
            Ok(p) => vec![p],
            Err(Error::MalformedPattern(why)) => return Ok(precondition("consensus", why)),
            Err(e) => return Err(e.into()),
        },
        None => match find_consensus_patterns(t, axis, limit) {
            Ok(found) => found,
            Err(Error::MalformedPattern(why)) => return Ok(precondition("consensus", why)),
            Err(e) => return Err(e.into()),
        },
    };
    if patterns.is_empty() {
        return Ok(precondition(
            "consensus",
            format!("no slice pair along axis {axis} forms a consensus pattern"),
        ));
    }
    let rs = Recommender::new(t, method, cfg)?;
    let mut checked = 0;
    let mut violations = Vec::new();
    for p in &patterns {
        let outcome = rs.verify_consensus(p)?;
        checked += outcome.checked;
        violations.extend(outcome.violations);
    }
    let message = format!(
        "{} patterns, {} common-unknown positions, {} ordering violations",
        patterns.len(),
        checked,
        violations.len()
    );
    let details = json!({
        "axis": axis,
        "patterns": patterns.len(),
        "positions_checked": checked,
        "violations": violations.len(),
        "gammas": patterns.iter().map(|p| p.gamma.clone()).collect::<Vec<_>>(),
        "first_violations": serde_json::to_value(violations.iter().take(LISTED).collect::<Vec<_>>())?,
    });
    Ok(AuditReport::new("consensus", pass_or_fail(violations.is_empty()), None, message, details))
}

fn precondition(audit: &str, why: String) -> AuditReport {
    AuditReport::new(audit, AuditStatus::PreconditionUnmet, None, why, Value::Null)
}

/// Shifts one user's ratings and counts top-N changes for everyone else.
/// Without an explicit user, picks the first whose best rating sits one step
/// below the scale maximum, falling back to user 1.
pub fn audit_fairness(
    t: &SparseTensor,
    user: Option<usize>,
    delta: f64,
    ns: &[usize],
    method: Method,
    cfg: &ConvergenceConfig,
    scale: Scale,
) -> Result<AuditReport> {
    let user = user
        .or_else(|| default_fairness_user(t, scale.max, scale.step))
        .unwrap_or(1);
    let probe = fairness_probe(t, user, delta, ns, method, cfg)?;
    let ok = probe.unaffected()
        && probe.max_other_deviation <= FAIRNESS_TOLERANCE
        && probe.shifted_user_deviation <= FAIRNESS_TOLERANCE;
    let changed: usize = probe.changed_users.iter().sum();
    let message = format!(
        "user {user} shifted by {delta}: max other-user deviation {:e}, {changed} top-N changes across {} list lengths",
        probe.max_other_deviation,
        ns.len()
    );
    let mut report = AuditReport::new(
        "fairness",
        pass_or_fail(ok),
        Some(FAIRNESS_TOLERANCE),
        message,
        serde_json::to_value(&probe)?,
    );
    report.csv = Some(probe.to_csv());
    Ok(report)
}
