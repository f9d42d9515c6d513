//! `s[f]`, `g[f]` and the small-`a` divergence class over a list of spacings.

use std::fs;
use std::path::Path;

use pathgeom::renorm::{classify_divergence, DivergenceReport};
use pathgeom::{renormalize, FKind, RenormResult};

use crate::output::{num, Table, VERSION};
use crate::svg::{Chart, Series, Style};

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub spacing: f64,
    pub result: Result<RenormResult, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub fkind: FKind,
    pub cutoff: f64,
    /// Sorted by decreasing spacing.
    pub rows: Vec<ScanRow>,
    /// Needs at least two spacings.
    pub divergence: Option<DivergenceReport>,
}

/// Fails only on invalid input. Quadrature breakdowns are kept as row errors.
pub fn scan(fkind: FKind, cutoff: f64, spacings: &[f64]) -> anyhow::Result<Scan> {
    fkind.validate()?;
    if spacings.is_empty() {
        anyhow::bail!("need at least one spacing");
    }
    let mut a: Vec<f64> = spacings.to_vec();
    if let Some(bad) = a.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        anyhow::bail!("spacings must be positive, got {bad}");
    }
    a.sort_by(|x, y| y.total_cmp(x));
    a.dedup();
    // Surface a bad cutoff as an input error rather than a row error.
    if !(cutoff.is_finite() && cutoff > 0.0) {
        anyhow::bail!("cutoff L must be positive, got {cutoff}");
    }
    let rows = a
        .iter()
        .map(|&spacing| ScanRow {
            spacing,
            result: renormalize(fkind, cutoff, spacing).map_err(|e| e.to_string()),
        })
        .collect();
    let divergence = if a.len() >= 2 {
        Some(classify_divergence(fkind, cutoff, &a)?)
    } else {
        None
    };
    Ok(Scan {
        fkind,
        cutoff,
        rows,
        divergence,
    })
}

fn f_columns(f: FKind) -> (&'static str, String) {
    match f {
        FKind::Identity => ("identity", String::new()),
        FKind::Gamma(g) => ("gamma", num(g)),
        FKind::Tanh => ("tanh", String::new()),
        FKind::Sin => ("sin", String::new()),
    }
}

fn meta(t: Table) -> Table {
    t.meta("generator", format!("pathgeom {VERSION}"))
        .meta("experiment", "renorm-scan")
}

/// `renorm.csv` and `divergence.csv`.
pub fn tables(s: &Scan) -> (Table, Table) {
    let (f, gamma) = f_columns(s.fkind);
    let mut values = meta(Table::new(&[
        "f", "gamma", "L", "a", "s", "s_err", "g", "g_err", "m_R", "status",
    ]));
    for row in &s.rows {
        let mut r = vec![f.to_string(), gamma.clone(), num(s.cutoff), num(row.spacing)];
        match &row.result {
            Ok(v) => r.extend([
                num(v.s_value),
                num(v.s_error),
                num(v.g_value),
                num(v.g_error),
                num(v.renormalized_mass()),
                "ok".into(),
            ]),
            Err(e) => {
                r.extend(std::iter::repeat_n(String::new(), 5));
                r.push(e.clone());
            }
        }
        values.rows.push(r);
    }
    let mut div = meta(Table::new(&["f", "gamma", "L", "a_min", "a_max", "slope", "class"]));
    if let Some(d) = &s.divergence {
        div.rows.push(vec![
            f.to_string(),
            gamma,
            num(s.cutoff),
            num(*d.spacings.last().unwrap()),
            num(d.spacings[0]),
            num(d.slope),
            d.class.to_string(),
        ]);
    }
    (values, div)
}

pub fn chart(s: &Scan) -> Chart {
    let mut c = Chart::new(
        &format!("renormalization: f = {}, L = {}", s.fkind, s.cutoff),
        "1/a",
        "value",
    )
    .log_log();
    let mut sv = Series::new("s", Style::LineMarkers);
    let mut gv = Series::new("g", Style::LineMarkers);
    for row in &s.rows {
        if let Ok(v) = &row.result {
            let x = 1.0 / row.spacing;
            if v.s_value > 0.0 {
                sv.points.push((x, v.s_value, v.s_error));
            }
            if v.g_value > 0.0 {
                gv.points.push((x, v.g_value, v.g_error));
            }
        }
    }
    c.series.push(sv);
    c.series.push(gv);
    c
}

/// Writes `data/renorm.csv`, `data/divergence.csv` and `figs/renorm.svg` into `dir`.
pub fn write(dir: &Path, s: &Scan) -> anyhow::Result<()> {
    fs::create_dir_all(dir.join("data"))?;
    fs::create_dir_all(dir.join("figs"))?;
    let (values, div) = tables(s);
    values.write(&dir.join("data/renorm.csv"))?;
    div.write(&dir.join("data/divergence.csv"))?;
    fs::write(dir.join("figs/renorm.svg"), chart(s).render())?;
    Ok(())
}
