//! Kolmogorov distance and convergence tables pairing measured distances
//! with the bounds from the stein module.

use serde::{Deserialize, Serialize};

use crate::distributions::{make_law, Cdf, ExtremeValueLaw};
use crate::error::Result;
use crate::families::WorkedFamily;
use crate::maxconv::{renormalize, NormingSequence};
use crate::numerics::Tolerance;
use crate::stein::stein_bound;

const GRID_SEEDS: usize = 512;
const REFINE_ROUNDS: usize = 40;
const SHRINK: f64 = 0.382; // golden-section complement

/// sup_x |F(x) - G(x)|, approximated by evaluating over both breakpoint
/// sets (with one-sided nudges for jumps), quantile-spaced seeds from
/// each argument, then shrinking refinement around the running maximizer.
/// The result is a lower bound within tolerance of the true supremum for
/// continuous inputs.
pub fn kolmogorov_distance(f: &Cdf, g: &Cdf, tol: &Tolerance) -> f64 {
    let d = |x: f64| (f.eval(x) - g.eval(x)).abs();

    let mut seeds: Vec<f64> = Vec::with_capacity(2 * GRID_SEEDS + 64);
    for cdf in [f, g] {
        for &b in cdf.breakpoints() {
            if b.is_finite() {
                let eps = 1e-9 * b.abs().max(1.0);
                seeds.extend([b - eps, b, b + eps]);
            }
        }
        for lim in [cdf.support_lo(), cdf.support_hi()] {
            if lim.is_finite() {
                let eps = 1e-9 * lim.abs().max(1.0);
                seeds.extend([lim - eps, lim, lim + eps]);
            }
        }
        for i in 0..GRID_SEEDS {
            let p = (i as f64 + 0.5) / GRID_SEEDS as f64;
            if let Ok(x) = cdf.quantile(p) {
                if x.is_finite() {
                    seeds.push(x);
                }
            }
        }
    }
    if seeds.is_empty() {
        seeds.push(0.0);
    }
    seeds.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut best = 0.0f64;
    let mut best_i = 0;
    for (i, &x) in seeds.iter().enumerate() {
        let v = d(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut best_x = seeds[best_i];

    // initial window: the gap to the neighboring seeds
    let left = if best_i > 0 { seeds[best_i - 1] } else { best_x - 1.0 };
    let right = if best_i + 1 < seeds.len() {
        seeds[best_i + 1]
    } else {
        best_x + 1.0
    };
    let mut h = (right - left).max(1e-12);

    for _ in 0..REFINE_ROUNDS {
        let before = best;
        for k in 1..=8 {
            let off = h * k as f64 / 8.0;
            for x in [best_x - off, best_x + off] {
                let v = d(x);
                if v > best {
                    best = v;
                    best_x = x;
                }
            }
        }
        h *= SHRINK;
        if (best - before) < tol.abs_tol && h < tol.abs_tol {
            break;
        }
    }
    best.min(1.0)
}

/// Checks that d_K is unchanged when both arguments are reparametrized by
/// the same increasing affine map x -> a x + b.
pub fn affine_invariance_check(f: &Cdf, g: &Cdf, a: f64, b: f64, tol: &Tolerance) -> Result<bool> {
    let s = NormingSequence::new(a, b, 1)?;
    let base = kolmogorov_distance(f, g, tol);
    let mapped = kolmogorov_distance(&renormalize(f, &s), &renormalize(g, &s), tol);
    Ok((base - mapped).abs() <= 1e-9)
}

/// One row of a convergence table. Fields are absent (null in JSON,
/// empty in CSV) when the row could not be computed; `error` carries the
/// reason in that case. For n = 1 only the trivial bound 1 is reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub dk: Option<f64>,
    pub stein_total: Option<f64>,
    pub integral_term: Option<f64>,
    pub boundary_term: Option<f64>,
    pub reference: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// For each n: build the family, run the bound, measure the Kolmogorov
/// distance against the free law with the same gamma. Per-row failures
/// are recorded in the row instead of aborting the table.
pub fn convergence_table<B>(gamma: f64, builder: B, n_values: &[u64]) -> Result<Vec<ConvergenceRow>>
where
    B: Fn(u64) -> Result<WorkedFamily>,
{
    let target = make_law(&ExtremeValueLaw::free(gamma)?)?;
    let tol = Tolerance::default();
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        rows.push(table_row(gamma, &builder, n, &target, &tol));
    }
    Ok(rows)
}

fn table_row<B>(gamma: f64, builder: &B, n: u64, target: &Cdf, tol: &Tolerance) -> ConvergenceRow
where
    B: Fn(u64) -> Result<WorkedFamily>,
{
    let reference = if n == 0 { f64::NAN } else { 1.0 / n as f64 };
    if n == 1 {
        return ConvergenceRow {
            n,
            dk: None,
            stein_total: Some(1.0),
            integral_term: None,
            boundary_term: None,
            reference,
            error: None,
        };
    }
    let fam = match builder(n) {
        Ok(fam) => fam,
        Err(e) => return failed_row(n, reference, e.to_string()),
    };
    let report = match stein_bound(gamma, &fam.profile) {
        Ok(report) => report,
        Err(e) => return failed_row(n, reference, e.to_string()),
    };
    let dk = kolmogorov_distance(&fam.cdf, target, tol);
    ConvergenceRow {
        n,
        dk: Some(dk),
        stein_total: Some(report.total),
        integral_term: Some(report.integral_term),
        boundary_term: Some(report.boundary_term),
        reference,
        error: None,
    }
}

fn failed_row(n: u64, reference: f64, error: String) -> ConvergenceRow {
    ConvergenceRow {
        n,
        dk: None,
        stein_total: None,
        integral_term: None,
        boundary_term: None,
        reference,
        error: Some(error),
    }
}

/// Shortest decimal representation that parses back to the same f64,
/// capped at 15 significant digits. Used for reproducible table output.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let mut sci = format!("{:.14e}", x);
    for p in 0..14usize {
        let s = format!("{:.*e}", p, x);
        if s.parse::<f64>() == Ok(x) {
            sci = s;
            break;
        }
    }
    render_sci(&sci)
}

fn render_sci(sci: &str) -> String {
    let (mant, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i64 = exp.parse().expect("exponent");
    let neg = mant.starts_with('-');
    let digits: String = mant
        .trim_start_matches('-')
        .chars()
        .filter(|c| *c != '.')
        .collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if neg { "-" } else { "" };
    if digits == "0" {
        return "0".to_string();
    }
    let point = exp + 1; // digit count left of the decimal point
    let ndig = digits.len() as i64;
    if point < -3 || point > 16 {
        // keep scientific, normalized as d.dddde±k
        let head = &digits[..1];
        let tail = &digits[1..];
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }
    if point <= 0 {
        format!("{sign}0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point >= ndig {
        format!("{sign}{}{}", digits, "0".repeat((point - ndig) as usize))
    } else {
        let (a, b) = digits.split_at(point as usize);
        format!("{sign}{a}.{b}")
    }
}

fn field(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// CSV with header n,dk,stein_total,integral_term,boundary_term,reference.
pub fn rows_to_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("n,dk,stein_total,integral_term,boundary_term,reference\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n,
            field(r.dk),
            field(r.stein_total),
            field(r.integral_term),
            field(r.boundary_term),
            format_float(r.reference)
        ));
    }
    out
}

fn json_field(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_else(|| "null".to_string())
}

/// JSON array of row objects with the same keys as the CSV columns;
/// numbers are formatted like the CSV so both artifacts are byte-stable.
pub fn rows_to_json(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("[\n");
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "  {{\"n\": {}, \"dk\": {}, \"stein_total\": {}, \"integral_term\": {}, \"boundary_term\": {}, \"reference\": {}",
            r.n,
            json_field(r.dk),
            json_field(r.stein_total),
            json_field(r.integral_term),
            json_field(r.boundary_term),
            format_float(r.reference)
        ));
        if let Some(e) = &r.error {
            out.push_str(&format!(
                ", \"error\": {}",
                serde_json::to_string(e).expect("string encodes")
            ));
        }
        out.push('}');
        if i + 1 < rows.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push(']');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::TabulatedCdf;
    use crate::families::{frechet_family, gumbel_family, weibull_family};
    use crate::maxconv::free_max_power;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn uniform() -> Cdf {
        TabulatedCdf::new(vec![0.0, 1.0], vec![0.0, 1.0])
            .unwrap()
            .to_cdf()
    }

    #[test]
    fn identical_arguments_give_zero() {
        let u = uniform();
        assert_eq!(kolmogorov_distance(&u, &u, &tol()), 0.0);
        let fam = gumbel_family(3).unwrap();
        assert_eq!(kolmogorov_distance(&fam.cdf, &fam.cdf, &tol()), 0.0);
    }

    #[test]
    fn uniform_against_its_square_power() {
        let u = uniform();
        let p = free_max_power(&u, 2).unwrap();
        let d = kolmogorov_distance(&u, &p, &tol());
        assert!((d - 0.5).abs() < 1e-9, "d = {d}");
    }

    #[test]
    fn symmetry_is_exact() {
        let u = uniform();
        let fam = gumbel_family(2).unwrap();
        let law = make_law(&ExtremeValueLaw::free(0.0).unwrap()).unwrap();
        assert_eq!(
            kolmogorov_distance(&u, &law, &tol()),
            kolmogorov_distance(&law, &u, &tol())
        );
        assert_eq!(
            kolmogorov_distance(&fam.cdf, &law, &tol()),
            kolmogorov_distance(&law, &fam.cdf, &tol())
        );
    }

    #[test]
    fn step_function_jump_is_seen() {
        // point mass at 0 against uniform: sup is 1 just left of the jump
        let step = Cdf::new(|x: f64| if x >= 0.0 { 1.0 } else { 0.0 }, 0.0, 0.0)
            .with_breakpoints(vec![0.0]);
        let u = uniform();
        let d = kolmogorov_distance(&step, &u, &tol());
        assert!((d - 1.0).abs() < 1e-8, "d = {d}");
    }

    #[test]
    fn gumbel_family_distance_beats_reference() {
        // dense-grid oracle for n = 2
        let fam = gumbel_family(2).unwrap();
        let law = make_law(&ExtremeValueLaw::free(0.0).unwrap()).unwrap();
        let d = kolmogorov_distance(&fam.cdf, &law, &tol());
        assert!(d <= 0.5 + 1e-6, "d = {d}");
        let mut brute = 0.0f64;
        for i in 0..1_000_000 {
            let x = -2.0 + 14.0 * i as f64 / 999_999.0;
            brute = brute.max((fam.cdf.eval(x) - law.eval(x)).abs());
        }
        assert!(d >= brute - 1e-6, "adaptive {d} vs brute {brute}");
    }

    #[test]
    fn affine_invariance() {
        let u = uniform();
        let p = free_max_power(&u, 2).unwrap();
        assert!(affine_invariance_check(&u, &p, 1.0, 0.0, &tol()).unwrap());
        assert!(affine_invariance_check(&u, &p, 3.0, 5.0, &tol()).unwrap());
        let f = make_law(&ExtremeValueLaw::classical(0.0).unwrap()).unwrap();
        let g = make_law(&ExtremeValueLaw::free(0.0).unwrap()).unwrap();
        assert!(affine_invariance_check(&f, &g, 2.0, -1.0, &tol()).unwrap());
    }

    #[test]
    fn range_is_unit_interval() {
        let step = Cdf::new(|x: f64| if x >= 5.0 { 1.0 } else { 0.0 }, 5.0, 5.0);
        let u = uniform();
        let d = kolmogorov_distance(&step, &u, &tol());
        assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn table_matches_reference_rate() {
        let rows = convergence_table(0.0, gumbel_family, &[2, 10, 100]).unwrap();
        for (row, want) in rows.iter().zip([0.5, 0.1, 0.01]) {
            assert!((row.stein_total.unwrap() - want).abs() < 1e-8);
            assert!(row.dk.unwrap() <= row.stein_total.unwrap() + 1e-6);
            assert!(row.error.is_none());
        }
        let rows = convergence_table(2.0, |n| frechet_family(2.0, n), &[1000]).unwrap();
        assert!((rows[0].stein_total.unwrap() - 0.001).abs() < 1e-8);
        let rows = convergence_table(-2.0, |n| weibull_family(-2.0, n), &[2]).unwrap();
        assert!(rows[0].dk.unwrap() <= 0.5 + 1e-6);
    }

    #[test]
    fn table_marks_failed_and_trivial_rows() {
        let rows = convergence_table(0.0, gumbel_family, &[1, 2]).unwrap();
        assert_eq!(rows[0].stein_total, Some(1.0));
        assert!(rows[0].dk.is_none() && rows[0].error.is_none());
        assert!(rows[1].dk.is_some());

        let rows = convergence_table(
            0.0,
            |_| Err(crate::error::Error::NoDensity),
            &[2, 3],
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(row.error.is_some());
            assert!(row.stein_total.is_none());
        }
    }

    #[test]
    fn triangle_inequality_on_tabulated_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let mut make = |lo: f64| {
                let mut xs = vec![lo];
                let mut fs = vec![0.0];
                for _ in 0..6 {
                    xs.push(xs.last().unwrap() + rng.gen_range(0.05..1.0));
                    fs.push((fs.last().unwrap() + rng.gen_range(0.01..0.4f64)).min(1.0));
                }
                let last = fs.last_mut().unwrap();
                *last = 1.0;
                TabulatedCdf::new(xs, fs).unwrap().to_cdf()
            };
            let (a, b, c) = (make(-1.0), make(-0.5), make(0.0));
            let t = tol();
            let dab = kolmogorov_distance(&a, &b, &t);
            let dbc = kolmogorov_distance(&b, &c, &t);
            let dac = kolmogorov_distance(&a, &c, &t);
            assert!(dac <= dab + dbc + 2e-10);
        }
    }

    #[test]
    fn float_formatting() {
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(0.01), "0.01");
        assert_eq!(format_float(-1.25e-7), "-1.25e-7");
        assert_eq!(format_float(1e20), "1e20");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333333");
        // capped output still parses close to the original
        let x = std::f64::consts::PI;
        let back: f64 = format_float(x).parse().unwrap();
        assert!((back - x).abs() < 1e-14);
        // representations at <= 15 significant digits round-trip exactly
        for v in [0.1, 2.0_f64.powi(-12), 123456.75, -3.5e-12] {
            let back: f64 = format_float(v).parse().unwrap();
            assert_eq!(back, v);
        }
        // values needing more digits stay within the 15-digit cap
        let capped = format_float(2.0_f64.powi(-30));
        let mantissa = capped.split('e').next().unwrap();
        let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
        assert!(digits <= 15, "{capped}");
        let back: f64 = capped.parse().unwrap();
        assert!((back - 2.0_f64.powi(-30)).abs() < 1e-24);
    }

    #[test]
    fn csv_and_json_rendering() {
        let rows = vec![
            ConvergenceRow {
                n: 2,
                dk: Some(0.25),
                stein_total: Some(0.5),
                integral_term: Some(0.3),
                boundary_term: Some(0.2),
                reference: 0.5,
                error: None,
            },
            ConvergenceRow {
                n: 1,
                dk: None,
                stein_total: Some(1.0),
                integral_term: None,
                boundary_term: None,
                reference: 1.0,
                error: None,
            },
        ];
        let csv = rows_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,dk,stein_total,integral_term,boundary_term,reference"
        );
        assert_eq!(lines.next().unwrap(), "2,0.25,0.5,0.3,0.2,0.5");
        assert_eq!(lines.next().unwrap(), "1,,1,,,1");

        let json = rows_to_json(&rows);
        let parsed: serde_json::Value = json.parse::<serde_json::Value>().unwrap();
        assert_eq!(parsed[0]["dk"], serde_json::json!(0.25));
        assert_eq!(parsed[1]["integral_term"], serde_json::Value::Null);
    }
}
