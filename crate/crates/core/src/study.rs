//! Grain-size trend checks over stress-strain histories.
//!
//! Every check takes one history per ferrite grain size. "Final" means the
//! last row of each history; callers that want an earlier strain pass
//! truncated slices.

use std::fmt;

use crate::postprocess::CurveRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Soft check not met.
    Warn,
    /// Not enough data (e.g. a single grain size).
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Warn => "WARN",
            CheckStatus::Skipped => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendCheck {
    pub id: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl fmt::Display for TrendCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.status, self.id, self.detail)
    }
}

type Block<'a> = (f64, &'a [CurveRow]);

fn check(id: &'static str, ok: bool, detail: String) -> TrendCheck {
    TrendCheck {
        id,
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        detail,
    }
}

fn skipped(id: &'static str, why: &str) -> TrendCheck {
    TrendCheck {
        id,
        status: CheckStatus::Skipped,
        detail: why.to_string(),
    }
}

/// Blocks sorted by ascending grain size, empty histories dropped.
fn by_size<'a>(blocks: &[Block<'a>]) -> Vec<Block<'a>> {
    let mut v: Vec<Block> = blocks.iter().copied().filter(|(_, r)| !r.is_empty()).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn final_values(blocks: &[Block], f: impl Fn(&CurveRow) -> f64) -> Vec<(f64, f64)> {
    blocks.iter().map(|(d, rows)| (*d, f(rows.last().unwrap()))).collect()
}

fn list(values: &[(f64, f64)]) -> String {
    values
        .iter()
        .map(|(d, v)| format!("dF={d}: {v:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// `f` strictly larger for every smaller grain size.
fn rises_as_size_falls(
    id: &'static str,
    what: &str,
    blocks: &[Block],
    f: impl Fn(&CurveRow) -> f64,
) -> TrendCheck {
    let b = by_size(blocks);
    if b.len() < 2 {
        return skipped(id, "needs at least two grain sizes");
    }
    let v = final_values(&b, f);
    let ok = v.windows(2).all(|w| w[0].1 > w[1].1);
    check(id, ok, format!("{what} at final strain rises as dF falls ({})", list(&v)))
}

/// `hi > lo` at every recorded step of every history.
fn dominates_everywhere(
    id: &'static str,
    what: &str,
    blocks: &[Block],
    hi: impl Fn(&CurveRow) -> f64,
    lo: impl Fn(&CurveRow) -> f64,
) -> TrendCheck {
    let b = by_size(blocks);
    if b.is_empty() {
        return skipped(id, "no history");
    }
    let mut first_miss = None;
    for (d, rows) in &b {
        if let Some(r) = rows.iter().find(|r| !(hi(r) > lo(r))) {
            first_miss.get_or_insert((*d, r.step, hi(r), lo(r)));
        }
    }
    let detail = match first_miss {
        None => format!("{what} at every step for every dF"),
        Some((d, s, h, l)) => format!("{what} violated for dF={d} at step {s} ({h:.4} vs {l:.4})"),
    };
    check(id, first_miss.is_none(), detail)
}

fn spread(v: &[(f64, f64)]) -> f64 {
    let max = v.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    max - min
}

pub fn stress_ordering(blocks: &[Block]) -> TrendCheck {
    rises_as_size_falls("stress-ordering", "whole-domain sigma_yy", blocks, |r| r.sigma_yy_mpa)
}

pub fn martensite_carries_more_stress(blocks: &[Block]) -> TrendCheck {
    dominates_everywhere(
        "stress-partition",
        "sigma_yy(M) > sigma_yy(F)",
        blocks,
        |r| r.sigma_yy_m_mpa,
        |r| r.sigma_yy_f_mpa,
    )
}

pub fn martensite_stress_spread(blocks: &[Block]) -> TrendCheck {
    let b = by_size(blocks);
    if b.len() < 2 {
        return skipped("stress-spread", "needs at least two grain sizes");
    }
    let m = spread(&final_values(&b, |r| r.sigma_yy_m_mpa));
    let f = spread(&final_values(&b, |r| r.sigma_yy_f_mpa));
    check(
        "stress-spread",
        m > f,
        format!("spread over dF at final strain: martensite {m:.3} MPa, ferrite {f:.3} MPa"),
    )
}

pub fn ferrite_strains_more(blocks: &[Block]) -> TrendCheck {
    dominates_everywhere(
        "strain-partition",
        "eps_eq(F) > eps_eq(M)",
        blocks,
        |r| r.eps_eq_f,
        |r| r.eps_eq_m,
    )
}

pub fn strain_gap_narrows(blocks: &[Block]) -> TrendCheck {
    let b = by_size(blocks);
    if b.len() < 2 {
        return skipped("strain-uniformity", "needs at least two grain sizes");
    }
    let v = final_values(&b, |r| r.eps_eq_f - r.eps_eq_m);
    let ok = v.windows(2).all(|w| w[0].1 < w[1].1);
    check(
        "strain-uniformity",
        ok,
        format!("F-M strain gap at final strain falls as dF falls ({})", list(&v)),
    )
}

pub fn gn_density_rises(blocks: &[Block]) -> [TrendCheck; 2] {
    [
        rises_as_size_falls("gn-ferrite", "mean GN density in ferrite", blocks, |r| r.rho_g_f_per_um2),
        rises_as_size_falls("gn-martensite", "mean GN density in martensite", blocks, |r| {
            r.rho_g_m_per_um2
        }),
    ]
}

pub fn ss_density_partition(blocks: &[Block]) -> [TrendCheck; 2] {
    [
        dominates_everywhere(
            "ss-partition",
            "rho_S(M) > rho_S(F)",
            blocks,
            |r| r.rho_s_m_per_um2,
            |r| r.rho_s_f_per_um2,
        ),
        rises_as_size_falls("ss-martensite", "mean SS density in martensite", blocks, |r| {
            r.rho_s_m_per_um2
        }),
    ]
}

/// GN densities below this are elastic-stage noise and carry no ordering.
pub const GN_FLOOR: f64 = 1e-2;

/// Soft check: within the first `window` of nominal strain the coarsest
/// microstructure sees martensite GN density overtake ferrite after ferrite
/// has led, the finest does not. Rows where both densities sit below
/// [`GN_FLOOR`] are ignored.
pub fn gn_inversion(blocks: &[Block], window: f64) -> TrendCheck {
    let id = "gn-inversion";
    let b = by_size(blocks);
    if b.len() < 2 {
        return skipped(id, "needs at least two grain sizes");
    }
    let reach = |rows: &[CurveRow]| rows.last().unwrap().strain_nominal >= window - 1e-12;
    let (fine, coarse) = (b[0], b[b.len() - 1]);
    if !reach(fine.1) || !reach(coarse.1) {
        return skipped(id, &format!("histories stop short of strain {window}"));
    }
    let (c, f) = (inversion(coarse.1, window), inversion(fine.1, window));
    let describe = |d: f64, at: Inversion| match at {
        Inversion::At(e) => format!("dF={d} inverts at strain {e:.4}"),
        Inversion::FerriteLeads => format!("dF={d} never inverts (ferrite leads)"),
        Inversion::MartensiteLeads => format!("dF={d} never inverts (martensite leads from the outset)"),
    };
    TrendCheck {
        id,
        status: if matches!(c, Inversion::At(_)) && !matches!(f, Inversion::At(_)) {
            CheckStatus::Pass
        } else {
            CheckStatus::Warn
        },
        detail: format!("{}; {}", describe(coarse.0, c), describe(fine.0, f)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Inversion {
    At(f64),
    FerriteLeads,
    MartensiteLeads,
}

fn inversion(rows: &[CurveRow], window: f64) -> Inversion {
    let mut ferrite_led = false;
    for r in rows.iter().filter(|r| r.strain_nominal <= window + 1e-12) {
        let (gf, gm) = (r.rho_g_f_per_um2, r.rho_g_m_per_um2);
        if gf.max(gm) < GN_FLOOR {
            continue;
        }
        if gf > gm {
            ferrite_led = true;
        } else if gm > gf && ferrite_led {
            return Inversion::At(r.strain_nominal);
        }
    }
    if ferrite_led {
        Inversion::FerriteLeads
    } else {
        Inversion::MartensiteLeads
    }
}

/// Every check in reporting order.
pub fn trend_report(blocks: &[Block]) -> Vec<TrendCheck> {
    let mut out = vec![
        stress_ordering(blocks),
        martensite_carries_more_stress(blocks),
        martensite_stress_spread(blocks),
        ferrite_strains_more(blocks),
        strain_gap_narrows(blocks),
    ];
    out.extend(gn_density_rises(blocks));
    out.extend(ss_density_partition(blocks));
    out.push(gn_inversion(blocks, 0.04));
    out
}

/// Rows up to and including nominal strain `strain`.
pub fn truncate_at_strain(rows: &[CurveRow], strain: f64) -> &[CurveRow] {
    let n = rows
        .iter()
        .take_while(|r| r.strain_nominal <= strain * (1.0 + 1e-9))
        .count();
    &rows[..n]
}
