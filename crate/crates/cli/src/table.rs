//! Plain-text renderings, 3 decimals.

use std::fmt::Write;

use stakeweigh_core::consensus::{ConcordanceReport, Ranking, RankingConflict};
use stakeweigh_core::utility::{PreferenceFunction, UtilityFunction};
use stakeweigh_core::{ComparisonMatrix, ConsistencyReport, PriorityVector};

fn width<'a>(names: impl Iterator<Item = &'a str>, header: &str) -> usize {
    names.map(str::len).max().unwrap_or(0).max(header.len())
}

pub fn priorities(p: &PriorityVector, lambda_max: Option<f64>) -> String {
    let w = width(p.attribute_ids().iter().map(|a| a.as_str()), "attribute");
    let mut out = format!("{:<w$}  priority\n", "attribute");
    for (id, v) in p.iter() {
        writeln!(out, "{:<w$}  {v:>8.3}", id.as_str()).unwrap();
    }
    if let Some(l) = lambda_max {
        writeln!(out, "\nlambda_max = {l:.3}").unwrap();
    }
    out
}

pub fn consistency(m: &ComparisonMatrix, r: &ConsistencyReport) -> String {
    let mut out = String::new();
    writeln!(out, "lambda_max  {:.3}", r.lambda_max).unwrap();
    writeln!(out, "CI          {:.3}", r.ci).unwrap();
    writeln!(out, "RI          {:.3}", r.ri).unwrap();
    writeln!(out, "CR          {:.3}", r.cr).unwrap();
    writeln!(
        out,
        "consistent  {}",
        if r.consistent { "yes" } else { "no" }
    )
    .unwrap();
    if !r.offending_triples.is_empty() {
        out.push_str("\noffending triples\n");
        let names = m.attributes();
        for t in &r.offending_triples {
            writeln!(
                out,
                "  {} > {} > {}  off by {:.3}x",
                names[t.i], names[t.j], names[t.k], t.deviation_factor
            )
            .unwrap();
        }
    }
    out
}

pub fn concordance(rankings: &[Ranking], r: &ConcordanceReport) -> String {
    let ids = rankings[0].attribute_ids();
    let w = width(ids.iter().map(|a| a.as_str()), "attribute");
    let mut out = format!("{:<w$}  rank sum\n", "attribute");
    for (id, sum) in ids.iter().zip(&r.rank_sums) {
        writeln!(out, "{:<w$}  {sum:>8}", id.as_str()).unwrap();
    }
    writeln!(out, "\nk = {}, n = {}", r.k, r.n).unwrap();
    writeln!(out, "S = {:.3}", r.s).unwrap();
    writeln!(out, "W = {:.3}", r.w_coefficient).unwrap();
    writeln!(
        out,
        "agreed = {} (threshold {:.3})",
        if r.agreed { "yes" } else { "no" },
        r.threshold
    )
    .unwrap();
    out
}

pub fn conflicts(conflicts: &[RankingConflict<String>]) -> String {
    if conflicts.is_empty() {
        return "no conflicts\n".to_owned();
    }
    let mut out = String::new();
    for c in conflicts {
        writeln!(
            out,
            "{} over {}: {}\n{} over {}: {}",
            c.first,
            c.second,
            c.first_preferred_by.join(", "),
            c.second,
            c.first,
            c.second_preferred_by.join(", ")
        )
        .unwrap();
    }
    out
}

pub fn utility(u: &UtilityFunction) -> String {
    let w = width(u.terms().iter().map(|t| t.attribute.as_str()), "attribute");
    let mut out = format!("{:<w$}  weight  preference\n", "attribute");
    for t in u.terms() {
        let pref = match t.preference {
            PreferenceFunction::IdentityLinear => "identity".to_owned(),
            PreferenceFunction::Sigmoid {
                insufficient,
                good_enough,
            } => format!("sigmoid {insufficient} .. {good_enough}"),
        };
        writeln!(
            out,
            "{:<w$}  {:>6.3}  {pref}",
            t.attribute.as_str(),
            t.weight
        )
        .unwrap();
    }
    writeln!(out, "\n{}", u.to_expression()).unwrap();
    out
}
