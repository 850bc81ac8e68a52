//! Hurst-space geometry: reference vector, unit vectors, cosine similarity,
//! development direction, Development Index and the three-way market
//! classification.
//!
//! A bundled fixture ([`table4_fixture`]) carries published per-interval Hurst
//! vectors of 18 markets, the printed reference row and the published index
//! values, so the whole chain can be run without market data.

use serde::{Deserialize, Serialize};

use crate::dma::HurstVector;
use crate::spectral_stats::MarketGroup;
use crate::{Error, Result};

pub const DIMENSION: usize = 9;

/// Printed development direction. It is not unit-norm (about 1.44).
pub const CANONICAL_DIRECTION: [f64; DIMENSION] = [-0.19, -0.40, -0.37, -0.45, -0.45, -0.57, -0.60, -0.59, -0.56];

/// Half-width of the band around each class border whose members are
/// labelled borderline and assigned to the emerging class.
pub const BORDERLINE_BAND: f64 = 0.01;

/// Leave-one-out change in the reference vector above which it is reported
/// as unstable.
pub const STABILITY_THRESHOLD: f64 = 0.01;

/// `||h - m||` below which a unit vector is undefined.
pub const DEGENERATE_NORM: f64 = 1e-12;

fn dot(a: &[f64; DIMENSION], b: &[f64; DIMENSION]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64; DIMENSION]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceVector {
    pub m: [f64; DIMENSION],
    pub n_markets: usize,
    /// Largest componentwise change of `m` when any one market is left out
    /// (0 for two markets, where leaving one out is not informative).
    pub leave_one_out_max_delta: f64,
    pub stable: bool,
}

impl ReferenceVector {
    /// A reference vector given directly, e.g. a published row.
    pub fn fixed(m: [f64; DIMENSION]) -> Self {
        Self {
            m,
            n_markets: 0,
            leave_one_out_max_delta: 0.0,
            stable: true,
        }
    }
}

/// Componentwise mean of complete Hurst vectors.
pub fn reference_vector(hs: &[HurstVector]) -> Result<ReferenceVector> {
    let values = hs.iter().map(|h| h.complete()).collect::<Result<Vec<_>>>()?;
    reference_from_values(&values)
}

pub fn reference_from_values(values: &[[f64; DIMENSION]]) -> Result<ReferenceVector> {
    let n = values.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { len: n, needed: 2 });
    }
    let mut sum = [0.0; DIMENSION];
    for v in values {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let m = sum.map(|s| s / n as f64);
    let mut delta: f64 = 0.0;
    if n > 2 {
        for v in values {
            for i in 0..DIMENSION {
                let loo = (sum[i] - v[i]) / (n - 1) as f64;
                delta = delta.max((loo - m[i]).abs());
            }
        }
    }
    Ok(ReferenceVector {
        m,
        n_markets: n,
        leave_one_out_max_delta: delta,
        stable: delta <= STABILITY_THRESHOLD,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitVector {
    pub market_id: String,
    pub s: [f64; DIMENSION],
}

/// `(h - m) / ||h - m||`.
pub fn unit_vector(market_id: impl Into<String>, h: &[f64; DIMENSION], m: &[f64; DIMENSION]) -> Result<UnitVector> {
    let mut d = [0.0; DIMENSION];
    for i in 0..DIMENSION {
        d[i] = h[i] - m[i];
    }
    let len = norm(&d);
    if !(len >= DEGENERATE_NORM) {
        return Err(Error::DegenerateVector { norm: len });
    }
    Ok(UnitVector {
        market_id: market_id.into(),
        s: d.map(|x| x / len),
    })
}

/// Pairwise dot products of unit vectors.
pub fn similarity_matrix(ss: &[UnitVector]) -> Vec<Vec<f64>> {
    let n = ss.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = dot(&ss[i].s, &ss[j].s).clamp(-1.0, 1.0);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Mean of `sim[i][j]` over `i` in `rows`, `j` in `cols`, skipping `i == j`.
pub fn mean_block_similarity(sim: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Option<f64> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for &i in rows {
        for &j in cols {
            if i != j {
                acc += sim[i][j];
                count += 1;
            }
        }
    }
    (count > 0).then(|| acc / count as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMode {
    /// The printed constant [`CANONICAL_DIRECTION`].
    #[default]
    Canonical,
    /// `(-1 - m) / ||-1 - m||`.
    Formula,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DevelopmentDirection {
    pub e: [f64; DIMENSION],
    pub source: DirectionMode,
}

pub fn development_direction(m: &ReferenceVector, mode: DirectionMode) -> DevelopmentDirection {
    let e = match mode {
        DirectionMode::Canonical => CANONICAL_DIRECTION,
        DirectionMode::Formula => {
            let d = m.m.map(|x| -1.0 - x);
            let len = norm(&d);
            d.map(|x| x / len)
        }
    };
    DevelopmentDirection { e, source: mode }
}

/// Projection `sum_i s_i e_i`.
pub fn development_index(s: &UnitVector, e: &DevelopmentDirection) -> f64 {
    dot(&s.s, &e.e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Borders {
    pub pi_max: f64,
    /// Developed / emerging border, `+pi_max / 2`.
    pub upper: f64,
    /// Emerging / underdeveloped border, `-pi_max / 2`.
    pub lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassAssignment {
    pub class: MarketGroup,
    pub borderline: bool,
}

/// Symmetric borders at `+-|Pi|_max / 2`; values within [`BORDERLINE_BAND`]
/// of a border go to the emerging class.
pub fn classify(indices: &[f64]) -> Result<(Borders, Vec<ClassAssignment>)> {
    if indices.is_empty() {
        return Err(Error::SampleTooSmall { len: 0, needed: 1 });
    }
    let pi_max = indices.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let borders = Borders {
        pi_max,
        upper: pi_max / 2.0,
        lower: -pi_max / 2.0,
    };
    let classes = indices
        .iter()
        .map(|&p| {
            let borderline =
                (p - borders.upper).abs() <= BORDERLINE_BAND || (p - borders.lower).abs() <= BORDERLINE_BAND;
            let class = if borderline {
                MarketGroup::Emerging
            } else if p > borders.upper {
                MarketGroup::Developed
            } else if p < borders.lower {
                MarketGroup::Underdeveloped
            } else {
                MarketGroup::Emerging
            };
            ClassAssignment { class, borderline }
        })
        .collect();
    Ok((borders, classes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketResult {
    pub market_id: String,
    pub s: [f64; DIMENSION],
    pub index: f64,
    pub class: MarketGroup,
    pub borderline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DevelopmentReport {
    /// Reference vector used for the unit vectors.
    pub reference: ReferenceVector,
    /// Mean of the supplied vectors, reported even when a fixed reference
    /// was used.
    pub computed_reference: ReferenceVector,
    pub direction: DevelopmentDirection,
    pub direction_norm: f64,
    pub markets: Vec<MarketResult>,
    pub similarity: Vec<Vec<f64>>,
    pub borders: Borders,
}

impl DevelopmentReport {
    pub fn market(&self, id: &str) -> Option<&MarketResult> {
        self.markets.iter().find(|m| m.market_id == id)
    }
}

/// Full chain from Hurst vectors to classes. `reference` overrides the
/// computed mean (for example with a published row).
pub fn development_report(
    vectors: &[(String, [f64; DIMENSION])],
    reference: Option<[f64; DIMENSION]>,
    mode: DirectionMode,
) -> Result<DevelopmentReport> {
    let values: Vec<[f64; DIMENSION]> = vectors.iter().map(|(_, h)| *h).collect();
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite Hurst component".into()));
    }
    let computed = reference_from_values(&values)?;
    let used = match reference {
        Some(m) => ReferenceVector::fixed(m),
        None => computed.clone(),
    };
    let direction = development_direction(&used, mode);
    let units = vectors
        .iter()
        .map(|(id, h)| unit_vector(id.clone(), h, &used.m))
        .collect::<Result<Vec<_>>>()?;
    let indices: Vec<f64> = units.iter().map(|u| development_index(u, &direction)).collect();
    let (borders, classes) = classify(&indices)?;
    let similarity = similarity_matrix(&units);
    let markets = units
        .into_iter()
        .zip(indices)
        .zip(classes)
        .map(|((u, index), c)| MarketResult {
            market_id: u.market_id,
            s: u.s,
            index,
            class: c.class,
            borderline: c.borderline,
        })
        .collect();
    Ok(DevelopmentReport {
        reference: used,
        computed_reference: computed,
        direction_norm: norm(&direction.e),
        direction,
        markets,
        similarity,
        borders,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureMarket {
    pub market_id: String,
    /// Group assigned before any Hurst analysis.
    pub group: MarketGroup,
    pub h: [f64; DIMENSION],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublishedIndex {
    pub market_id: String,
    pub index: f64,
    pub class: MarketGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fixture {
    pub markets: Vec<FixtureMarket>,
    /// Reference row as printed (two decimals).
    pub printed_reference: [f64; DIMENSION],
    pub published: Vec<PublishedIndex>,
}

impl Fixture {
    pub fn vectors(&self) -> Vec<(String, [f64; DIMENSION])> {
        self.markets.iter().map(|m| (m.market_id.clone(), m.h)).collect()
    }

    pub fn published(&self, id: &str) -> Option<&PublishedIndex> {
        self.published.iter().find(|p| p.market_id == id)
    }
}

const TABLE4_HURST: &str = include_str!("../fixtures/table4_hurst.csv");
const TABLE4_REFERENCE: &str = include_str!("../fixtures/table4_reference.csv");
const TABLE4_PUBLISHED: &str = include_str!("../fixtures/table4_published_index.csv");

fn fixture_records(text: &str) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .records()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

fn parse_field(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<f64> {
    rec.get(idx)
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("bad number in column {}", idx + 1),
        })
}

fn parse_row(rec: &csv::StringRecord, first: usize, line: usize) -> Result<[f64; DIMENSION]> {
    let mut out = [0.0; DIMENSION];
    for (i, o) in out.iter_mut().enumerate() {
        *o = parse_field(rec, first + i, line)?;
    }
    Ok(out)
}

/// The bundled 18-market fixture.
pub fn table4_fixture() -> Result<Fixture> {
    let mut markets = Vec::new();
    for (i, rec) in fixture_records(TABLE4_HURST)?.iter().enumerate() {
        markets.push(FixtureMarket {
            market_id: rec[0].to_string(),
            group: rec[1].parse()?,
            h: parse_row(rec, 2, i + 2)?,
        });
    }
    let reference = fixture_records(TABLE4_REFERENCE)?;
    let printed_reference = parse_row(reference.first().ok_or(Error::EmptySeries { len: 0 })?, 0, 2)?;
    let mut published = Vec::new();
    for (i, rec) in fixture_records(TABLE4_PUBLISHED)?.iter().enumerate() {
        published.push(PublishedIndex {
            market_id: rec[0].to_string(),
            index: parse_field(rec, 1, i + 2)?,
            class: rec[2].parse()?,
        });
    }
    Ok(Fixture {
        markets,
        printed_reference,
        published,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e_k(k: usize) -> [f64; DIMENSION] {
        let mut v = [0.0; DIMENSION];
        v[k] = 1.0;
        v
    }

    #[test]
    fn reference_of_identical_vectors() {
        let v = [0.5, 0.6, 0.7, 0.1, 0.2, 0.3, 0.4, 0.8, 0.9];
        let r = reference_from_values(&[v, v]).unwrap();
        assert_eq!(r.m, v);
        assert!(reference_from_values(&[v]).is_err());
        let incomplete = HurstVector::from_values("x", v);
        let mut broken = incomplete.clone();
        broken.components[3].h = None;
        assert!(matches!(
            reference_vector(&[incomplete, broken]),
            Err(Error::IncompleteVector { .. })
        ));
    }

    #[test]
    fn leave_one_out_delta() {
        // Means of {0, 0, 3}: m = 1; leaving out 3 gives 0, so delta = 1.
        let rows = [[0.0; DIMENSION], [0.0; DIMENSION], [3.0; DIMENSION]];
        let r = reference_from_values(&rows).unwrap();
        assert!((r.leave_one_out_max_delta - 1.0).abs() < 1e-12);
        assert!(!r.stable);
    }

    #[test]
    fn unit_vectors() {
        let m = [0.0; DIMENSION];
        let u = unit_vector("a", &e_k(0), &m).unwrap();
        assert_eq!(u.s, e_k(0));
        assert!(matches!(unit_vector("a", &m, &m), Err(Error::DegenerateVector { .. })));
        let u = unit_vector("b", &[0.3, -0.2, 0.9, 0.1, 0.0, 0.5, 0.7, -0.4, 0.2], &[0.1; DIMENSION]).unwrap();
        assert!((norm(&u.s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_vector_shift_invariance() {
        let h = [0.36, 0.49, 0.44, 0.45, 0.47, 0.55, 0.58, 0.59, 0.56];
        let m = [0.37, 0.51, 0.49, 0.54, 0.54, 0.62, 0.64, 0.63, 0.61];
        let a = unit_vector("x", &h, &m).unwrap();
        let b = unit_vector("x", &h.map(|v| v + 0.25), &m.map(|v| v + 0.25)).unwrap();
        for (x, y) in a.s.iter().zip(&b.s) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn similarity_basics() {
        let a = UnitVector {
            market_id: "a".into(),
            s: e_k(0),
        };
        let b = UnitVector {
            market_id: "b".into(),
            s: e_k(0).map(|v| -v),
        };
        let c = UnitVector {
            market_id: "c".into(),
            s: e_k(4),
        };
        let sim = similarity_matrix(&[a, b, c]);
        assert_eq!(sim[0][1], -1.0);
        assert_eq!(sim[0][2], 0.0);
        for (i, row) in sim.iter().enumerate() {
            assert_eq!(row[i], 1.0);
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, sim[j][i]);
            }
        }
        assert_eq!(mean_block_similarity(&sim, &[0, 1], &[0, 1]), Some(-1.0));
    }

    #[test]
    fn directions() {
        let m0 = ReferenceVector::fixed([0.0; DIMENSION]);
        let e = development_direction(&m0, DirectionMode::Formula);
        for v in e.e {
            assert!((v + 1.0 / 3.0).abs() < 1e-12);
        }
        let m = ReferenceVector::fixed([0.37, 0.51, 0.49, 0.54, 0.54, 0.62, 0.64, 0.63, 0.61]);
        assert!((norm(&development_direction(&m, DirectionMode::Formula).e) - 1.0).abs() < 1e-9);
        assert_eq!(
            development_direction(&m, DirectionMode::Canonical).e,
            CANONICAL_DIRECTION
        );
    }

    #[test]
    fn index_is_linear_and_orthogonal_zero() {
        let e = DevelopmentDirection {
            e: e_k(2),
            source: DirectionMode::Formula,
        };
        assert_eq!(
            development_index(
                &UnitVector {
                    market_id: "a".into(),
                    s: e_k(5)
                },
                &e
            ),
            0.0
        );
        let d = DevelopmentDirection {
            e: CANONICAL_DIRECTION,
            source: DirectionMode::Canonical,
        };
        let a = [0.1, -0.3, 0.2, 0.0, 0.5, -0.1, 0.3, 0.2, -0.4];
        let b = [-0.2, 0.1, 0.4, 0.3, -0.1, 0.2, 0.0, -0.3, 0.1];
        let mix: [f64; DIMENSION] = std::array::from_fn(|i| 0.3 * a[i] + 0.7 * b[i]);
        let pi = |s: [f64; DIMENSION]| {
            development_index(
                &UnitVector {
                    market_id: String::new(),
                    s,
                },
                &d,
            )
        };
        assert!((pi(mix) - (0.3 * pi(a) + 0.7 * pi(b))).abs() < 1e-12);
    }

    #[test]
    fn classification_rules() {
        let (b, c) = classify(&[1.36, -1.2, 0.2, -0.68, 0.69, 0.70]).unwrap();
        assert_eq!(b.pi_max, 1.36);
        let classes: Vec<MarketGroup> = c.iter().map(|x| x.class).collect();
        assert_eq!(
            classes,
            [
                MarketGroup::Developed,
                MarketGroup::Underdeveloped,
                MarketGroup::Emerging,
                MarketGroup::Emerging,
                MarketGroup::Emerging,
                MarketGroup::Developed
            ]
        );
        assert!(c[3].borderline && c[4].borderline && !c[5].borderline);

        let (_, c) = classify(&[0.8]).unwrap();
        assert_eq!(c[0].class, MarketGroup::Developed);
        let (_, c) = classify(&[-0.8]).unwrap();
        assert_eq!(c[0].class, MarketGroup::Underdeveloped);
        let (_, c) = classify(&[0.5, 0.5, 0.5]).unwrap();
        assert!(c.iter().all(|x| x.class == MarketGroup::Developed));
        assert!(classify(&[]).is_err());
    }

    #[test]
    fn classification_permutation_invariant() {
        let pis = [1.1, -0.3, 0.9, -1.4, 0.1, 0.72];
        let (_, a) = classify(&pis).unwrap();
        let rev: Vec<f64> = pis.iter().rev().copied().collect();
        let (_, mut b) = classify(&rev).unwrap();
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn fixture_loads() {
        let f = table4_fixture().unwrap();
        assert_eq!(f.markets.len(), 18);
        assert_eq!(f.published.len(), 18);
        for m in &f.markets {
            assert!(f.published(&m.market_id).is_some(), "{}", m.market_id);
        }
        let dax = f.markets.iter().find(|m| m.market_id == "DAX").unwrap();
        assert_eq!(dax.h, [0.36, 0.49, 0.44, 0.45, 0.47, 0.55, 0.58, 0.59, 0.56]);
        assert_eq!(dax.group, MarketGroup::Developed);
    }

    #[test]
    fn fixture_dax_unit_vector() {
        // Hand arithmetic: h - m = (-1, -2, -5, -9, -7, -7, -6, -4, -5) / 100, norm sqrt(286) / 100.
        let f = table4_fixture().unwrap();
        let dax = f.markets.iter().find(|m| m.market_id == "DAX").unwrap();
        let u = unit_vector("DAX", &dax.h, &f.printed_reference).unwrap();
        let d = [-1.0, -2.0, -5.0, -9.0, -7.0, -7.0, -6.0, -4.0, -5.0];
        let len = 286f64.sqrt();
        for (s, x) in u.s.iter().zip(d) {
            assert!((s - x / len).abs() < 1e-9);
        }
        let expected = [-0.059, -0.118, -0.296, -0.532, -0.414, -0.414, -0.355, -0.237, -0.296];
        for (s, x) in u.s.iter().zip(expected) {
            assert!((s - x).abs() < 0.03);
        }
    }
}
