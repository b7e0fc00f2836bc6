//! Verification reports: measured quantities set against their asymptotic
//! predictions, one line per law.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use kirchhoff_core::asymptotics::{
    asymptotic_tail, boundary_energy_law, boundary_epsilon_law, fit_power_law, inner_epsilon_law, multiplier_limit,
    TrendStat,
};
use kirchhoff_core::domain_potential::{WellClassification, WellInfo};
use kirchhoff_core::minimizer::UniquenessProbe;
use kirchhoff_core::{Error, Result};

use crate::config::Mode;
use crate::table::SweepRow;

/// Decades of `a`, at the small end of a sweep, over which power laws are fitted.
pub const FIT_DECADES: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub law: String,
    pub predicted: f64,
    pub measured: f64,
    /// `measured / predicted`, absent when the prediction is zero.
    pub ratio: Option<f64>,
    /// Acceptance rule, human readable.
    pub rule: String,
    pub pass: bool,
}

impl LawCheck {
    fn relative(law: &str, predicted: f64, measured: f64, tol: f64) -> Self {
        let ratio = measured / predicted;
        Self {
            law: law.into(),
            predicted,
            measured,
            ratio: Some(ratio),
            rule: format!("|ratio - 1| <= {tol}"),
            pass: (ratio - 1.0).abs() <= tol,
        }
    }

    fn below(law: &str, measured: f64, bound: f64) -> Self {
        Self {
            law: law.into(),
            predicted: 0.0,
            measured,
            ratio: None,
            rule: format!("measured < {bound}"),
            pass: measured < bound,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: Mode,
    pub dimension: usize,
    /// Largest well exponent.
    pub p: f64,
    /// Well the laws refer to.
    pub well: Option<WellInfo>,
    pub checks: Vec<LawCheck>,
    pub points_used: usize,
    /// Values of `a` left out because their runs had not converged.
    pub skipped: Vec<f64>,
    /// Context that is reported but not judged.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "## Verification report ({} mode, N = {}, p = {})\n", self.mode, self.dimension, self.p);
        let _ = writeln!(s, "| law | predicted | measured | ratio | rule | pass |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for c in &self.checks {
            let ratio = c.ratio.map_or("-".to_string(), |r| format!("{r:.4}"));
            let pass = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(
                s,
                "| {} | {:.6e} | {:.6e} | {} | {} | {} |",
                c.law, c.predicted, c.measured, ratio, c.rule, pass
            );
        }
        let _ = writeln!(s, "\n{} points used", self.points_used);
        if !self.skipped.is_empty() {
            let list: Vec<String> = self.skipped.iter().map(|a| format!("{a:e}")).collect();
            let _ = writeln!(s, "unconverged, skipped: {}", list.join(", "));
        }
        for n in &self.notes {
            let _ = writeln!(s, "\n{n}");
        }
        s
    }
}

/// Converged rows sorted by decreasing `a`, and the skipped values.
fn usable(rows: &[SweepRow]) -> (Vec<SweepRow>, Vec<f64>) {
    let mut used: Vec<SweepRow> = rows.iter().filter(|r| r.converged).copied().collect();
    used.sort_by(|x, y| y.a.total_cmp(&x.a));
    let skipped = rows.iter().filter(|r| !r.converged).map(|r| r.a).collect();
    (used, skipped)
}

fn multiplier_check(last: &SweepRow, dimension: usize, b: f64) -> LawCheck {
    LawCheck::relative(
        "multiplier limit eps^4 mu",
        multiplier_limit(dimension, b),
        last.mu * last.epsilon.powi(4),
        0.10,
    )
}

fn monotone_check(rows: &[SweepRow]) -> LawCheck {
    let inversions = rows.windows(2).filter(|w| w[1].e_total > w[0].e_total).count();
    LawCheck {
        law: "energy increasing in a".into(),
        predicted: 0.0,
        measured: inversions as f64,
        ratio: None,
        rule: "no inversions".into(),
        pass: inversions == 0,
    }
}

/// Concentration at an interior flattest well.
pub fn inner_report(rows: &[SweepRow], cls: &WellClassification, dimension: usize, b: f64) -> Result<VerificationReport> {
    let well = cls.dominant().clone();
    let lambda = well
        .lambda
        .ok_or_else(|| Error::Precondition("inner report needs an interior flattest well".into()))?;
    let p = cls.p;
    let (used, skipped) = usable(rows);
    let series: Vec<(f64, f64)> = used.iter().map(|r| (r.a, r.e_total)).collect();
    let tail = asymptotic_tail(&series, FIT_DECADES);
    let fit = fit_power_law(&tail, false)?;
    let window = format!("fit on a in [{:.3e}, {:.3e}]", tail[tail.len() - 1].0, tail[0].0);
    let mut notes = Vec::new();
    if tail.len() < series.len() {
        if let Ok(full) = fit_power_law(&series, false) {
            notes.push(format!(
                "fit over all {} points: exponent {:.6}, prefactor {:.6e}",
                series.len(),
                full.exponent,
                full.prefactor
            ));
        }
    }
    let last = used.last().expect("fit succeeded on a nonempty series");
    let offset = (last.z - well.location[0]).abs() / last.a.powf(1.0 / (p + 2.0));
    let mut exponent = LawCheck::relative("energy exponent", p / (p + 2.0), fit.exponent, 0.05);
    let mut prefactor = LawCheck::relative("energy prefactor", (p + 2.0) / p * lambda * lambda, fit.prefactor, 0.10);
    for c in [&mut exponent, &mut prefactor] {
        c.rule = format!("{}, {window}", c.rule);
    }
    let checks = vec![
        exponent,
        prefactor,
        LawCheck::relative("blow-up length", inner_epsilon_law(p, lambda, last.a), last.epsilon, 0.10),
        LawCheck::below("peak offset |z - x1| / a^(1/(p+2))", offset, 0.1),
        multiplier_check(last, dimension, b),
        monotone_check(&used),
    ];
    Ok(VerificationReport {
        mode: Mode::Inner,
        dimension,
        p,
        well: Some(well),
        checks,
        points_used: used.len(),
        skipped,
        notes,
    })
}

/// Concentration at a boundary flattest well. The laws carry corrections that
/// decay like `1/ln(1/a)`, so the checks combine loose ratios with the
/// direction of the trend.
pub fn boundary_report(
    rows: &[SweepRow],
    cls: &WellClassification,
    dimension: usize,
    b: f64,
) -> Result<VerificationReport> {
    let well = cls.dominant().clone();
    let kappa = match (well.interior, well.kappa.finite()) {
        (false, Some(k)) => k,
        _ => return Err(Error::Precondition("boundary report needs a boundary flattest well".into())),
    };
    let p = cls.p;
    let (used, skipped) = usable(rows);
    if used.len() < 3 {
        return Err(Error::AsymptoticRegimeNotReached(format!(
            "only {} converged points",
            used.len()
        )));
    }
    let a: Vec<f64> = used.iter().map(|r| r.a).collect();
    let offset: Vec<f64> = used
        .iter()
        .map(|r| (r.z - well.location[0]).abs() / (r.epsilon * r.epsilon.ln().abs()))
        .collect();
    let eps: Vec<f64> = used.iter().map(|r| r.epsilon / boundary_epsilon_law(p, kappa, r.a)).collect();
    let off_trend = TrendStat::of(&a, &offset);
    let eps_trend = TrendStat::of(&a, &eps);
    let limit = (p + 4.0) / 2.0;
    let mut off_check = LawCheck::relative("peak offset |z - x0| / (eps |ln eps|), last third", limit, off_trend.last_third_mean, 0.15);
    off_check.rule.push_str(", trending toward the limit");
    off_check.pass &= off_trend.approaches(limit);
    let mut eps_check = LawCheck::relative("blow-up length ratio, last third", 1.0, eps_trend.last_third_mean, 0.30);
    eps_check.rule.push_str(", trending toward 1");
    eps_check.pass &= eps_trend.approaches(1.0);
    let last = used.last().expect("checked above");
    let checks = vec![
        off_check,
        eps_check,
        LawCheck::relative("energy law", boundary_energy_law(p, kappa, last.a), last.e_total, 0.20),
        multiplier_check(last, dimension, b),
        monotone_check(&used),
    ];
    Ok(VerificationReport {
        mode: Mode::Boundary,
        dimension,
        p,
        well: Some(well),
        checks,
        points_used: used.len(),
        skipped,
        notes: Vec::new(),
    })
}

/// Agreement of the flow started from several random states.
pub fn uniqueness_report(probe: &UniquenessProbe, tolerance: f64, dimension: usize, p: f64) -> VerificationReport {
    let unconverged: Vec<f64> = probe.results.iter().filter(|r| !r.converged).map(|r| r.a).collect();
    let mut dist = LawCheck::below("largest pairwise L2 distance", probe.max_distance, tolerance);
    dist.rule = format!("measured <= {tolerance}, every run converged");
    dist.pass = probe.max_distance <= tolerance && probe.all_converged;
    VerificationReport {
        mode: Mode::Uniqueness,
        dimension,
        p,
        well: None,
        checks: vec![dist],
        points_used: probe.results.len(),
        skipped: unconverged,
        notes: Vec::new(),
    }
}

/// Outcome of one `a = 0` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseRecord {
    pub nodes: usize,
    pub h: f64,
    pub collapsed: bool,
    /// Energy when the run stopped.
    pub energy: f64,
    pub epsilon: f64,
    pub steps: usize,
}

pub fn nonexistence_report(records: &[CollapseRecord], dimension: usize, p: f64) -> VerificationReport {
    let collapsed = records.iter().filter(|r| r.collapsed).count();
    let worst = records.iter().map(|r| r.energy).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        LawCheck {
            law: "collapse on every grid".into(),
            predicted: records.len() as f64,
            measured: collapsed as f64,
            ratio: Some(collapsed as f64 / records.len() as f64),
            rule: "ratio = 1".into(),
            pass: collapsed == records.len(),
        },
        LawCheck::below("largest pre-collapse energy", worst, 1e-2),
    ];
    VerificationReport {
        mode: Mode::Nonexistence,
        dimension,
        p,
        well: None,
        checks,
        points_used: records.len(),
        skipped: Vec::new(),
        notes: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(a: f64, e: f64) -> SweepRow {
        SweepRow {
            a,
            e_total: e,
            kinetic: 0.0,
            kirchhoff: 0.0,
            potential: 0.0,
            interaction: 0.0,
            mu: -1.5 / (a.powf(0.25)).powi(4),
            epsilon: a.powf(0.25),
            z: 0.0,
            steps: 1,
            converged: true,
        }
    }

    #[test]
    fn exact_power_law_passes_inner_checks() {
        let lambda = 1.3_f64;
        let rows: Vec<SweepRow> = (0..6)
            .map(|k| {
                let a = 10f64.powi(-2 - k);
                let mut r = row(a, 2.0 * lambda * lambda * a.sqrt());
                r.epsilon = a.powf(0.25) / lambda;
                r.mu = -1.5 / r.epsilon.powi(4);
                r
            })
            .collect();
        let well = WellInfo {
            index: 0,
            location: vec![0.0],
            exponent: 2.0,
            flattest: true,
            interior: true,
            kappa: kirchhoff_core::domain_potential::Kappa::Finite(1.0),
            lambda: Some(lambda),
        };
        let cls = WellClassification {
            p: 2.0,
            wells: vec![well],
            interior_flattest: vec![0],
            boundary_flattest: vec![],
            regime: kirchhoff_core::domain_potential::Regime::Inner,
            lambda_min: Some(lambda),
            tied: false,
        };
        let rep = inner_report(&rows, &cls, 1, 1.0).unwrap();
        assert!(rep.all_pass(), "{}", rep.to_markdown());
        for c in &rep.checks {
            if let Some(r) = c.ratio {
                assert!((r - 1.0).abs() < 1e-12, "{}: {r}", c.law);
            }
        }
        let md = rep.to_markdown();
        assert_eq!(md.lines().filter(|l| l.starts_with("| ")).count(), rep.checks.len() + 1);
    }

    #[test]
    fn unconverged_rows_are_skipped() {
        let mut rows = vec![row(1e-2, 1.0), row(1e-3, 0.5)];
        rows[1].converged = false;
        let (used, skipped) = usable(&rows);
        assert_eq!(used.len(), 1);
        assert_eq!(skipped, vec![1e-3]);
    }
}
