//! JSON round-trip of the block layout and CSV export of diagonal profiles.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::kernel::{CMat, Kernel, SeparableTerm};
use super::{Blocks, HasBlocks, Observable, StateFunctional};
use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::spectral_model::{CscoSpec, Scheme, SpectrumGrid};

/// Row-major `M×M` matrix of `[re, im]` pairs.
type JsonMat = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
struct JsonGrid {
    scheme: Scheme,
    omega_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum JsonKernel {
    Zero,
    Dense { blocks: Vec<JsonMat> },
    Separable { terms: Vec<JsonTerm> },
}

#[derive(Serialize, Deserialize)]
struct JsonTerm {
    left: Vec<JsonMat>,
    right: Vec<JsonMat>,
}

#[derive(Serialize, Deserialize)]
struct JsonFunctional {
    kind: String,
    grid: JsonGrid,
    csco: CscoSpec<f64>,
    bound: Option<JsonMat>,
    diag: Vec<JsonMat>,
    cross_lo: Option<Vec<JsonMat>>,
    cross_ol: Option<Vec<JsonMat>>,
    full: JsonKernel,
}

fn mat_out<T: Real>(a: &CMat<T>) -> JsonMat {
    (0..a.nrows())
        .map(|i| {
            (0..a.ncols())
                .map(|j| [a[(i, j)].re.as_f64(), a[(i, j)].im.as_f64()])
                .collect()
        })
        .collect()
}

fn mat_in<T: Real>(rows: &JsonMat) -> Result<CMat<T>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(invalid("label blocks must be square"));
    }
    Ok(CMat::from_fn(n, n, |i, j| {
        Complex::new(T::lit(rows[i][j][0]), T::lit(rows[i][j][1]))
    }))
}

fn mats_in<T: Real>(v: &[JsonMat]) -> Result<Vec<CMat<T>>> {
    v.iter().map(mat_in).collect()
}

/// Serializes an observable or a state to the documented JSON layout.
pub fn to_json<T: Real, X: HasBlocks<T>>(x: &X) -> serde_json::Value {
    let b = x.blocks();
    let g = x.grid();
    let c = x.csco();
    let doc = JsonFunctional {
        kind: if x.is_state() { "state" } else { "observable" }.into(),
        grid: JsonGrid {
            scheme: g.scheme(),
            omega_max: g.omega_max().as_f64(),
            nodes: g.nodes().iter().map(|v| v.as_f64()).collect(),
            weights: g.weights().iter().map(|v| v.as_f64()).collect(),
        },
        csco: CscoSpec {
            bound_energy: c.bound_energy.map(Real::as_f64),
            degeneracy: c.degeneracy,
            n_momenta: c.n_momenta,
            n_isolating: c.n_isolating,
        },
        bound: b.bound.as_ref().map(mat_out),
        diag: b.diag.iter().map(mat_out).collect(),
        cross_lo: b.cross_lo.as_ref().map(|v| v.iter().map(mat_out).collect()),
        cross_ol: b.cross_ol.as_ref().map(|v| v.iter().map(mat_out).collect()),
        full: match &b.full {
            Kernel::Zero => JsonKernel::Zero,
            Kernel::Dense(v) => JsonKernel::Dense {
                blocks: v.iter().map(mat_out).collect(),
            },
            Kernel::Separable(terms) => JsonKernel::Separable {
                terms: terms
                    .iter()
                    .map(|t| JsonTerm {
                        left: t.left.iter().map(mat_out).collect(),
                        right: t.right.iter().map(mat_out).collect(),
                    })
                    .collect(),
            },
        },
    };
    serde_json::to_value(doc).expect("plain data serializes")
}

/// Decoded JSON document: either an observable or a state.
#[derive(Clone, Debug)]
pub enum Decoded<T: Real> {
    Observable(Observable<T>),
    State(StateFunctional<T>),
}

/// Parses the layout written by [`to_json`].
pub fn from_json<T: Real>(value: &serde_json::Value) -> Result<Decoded<T>> {
    let doc: JsonFunctional = serde_json::from_value(value.clone())?;
    let grid = Arc::new(SpectrumGrid::from_parts(
        doc.grid.scheme,
        T::lit(doc.grid.omega_max),
        doc.grid.nodes.iter().map(|&v| T::lit(v)).collect(),
        doc.grid.weights.iter().map(|&v| T::lit(v)).collect(),
    )?);
    let csco = CscoSpec::new(
        doc.csco.bound_energy.map(T::lit),
        doc.csco.degeneracy,
        doc.csco.n_momenta,
        doc.csco.n_isolating,
    )?;
    let blocks = Blocks {
        bound: doc.bound.as_ref().map(mat_in).transpose()?,
        diag: mats_in(&doc.diag)?,
        cross_lo: doc.cross_lo.as_deref().map(mats_in).transpose()?,
        cross_ol: doc.cross_ol.as_deref().map(mats_in).transpose()?,
        full: match &doc.full {
            JsonKernel::Zero => Kernel::Zero,
            JsonKernel::Dense { blocks } => Kernel::Dense(mats_in(blocks)?),
            JsonKernel::Separable { terms } => Kernel::Separable(
                terms
                    .iter()
                    .map(|t| {
                        Ok(SeparableTerm {
                            left: mats_in(&t.left)?,
                            right: mats_in(&t.right)?,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
        },
    };
    match doc.kind.as_str() {
        "state" => Ok(Decoded::State(StateFunctional::new(grid, csco, blocks)?)),
        "observable" => Ok(Decoded::Observable(Observable::new(grid, csco, blocks)?)),
        other => Err(invalid(format!("unknown functional kind '{other}'"))),
    }
}

/// CSV rows `omega,m,value` with the real diagonal entries of the bound and
/// continuum diagonal blocks.
pub fn diagonal_profile_csv<T: Real, X: HasBlocks<T>>(x: &X) -> String {
    let mut out = String::from("omega,m,value\n");
    let b = x.blocks();
    if let (Some(bb), Some(e0)) = (&b.bound, x.csco().bound_energy) {
        for m in 0..bb.nrows() {
            let _ = writeln!(
                out,
                "{:.12e},{m},{:.12e}",
                e0.as_f64(),
                bb[(m, m)].re.as_f64()
            );
        }
    }
    for (d, w) in b.diag.iter().zip(x.grid().nodes()) {
        for m in 0..d.nrows() {
            let _ = writeln!(
                out,
                "{:.12e},{m},{:.12e}",
                w.as_f64(),
                d[(m, m)].re.as_f64()
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::{random_observable, random_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn json_round_trip_preserves_blocks() {
        let g = Arc::new(SpectrumGrid::build(Scheme::UniformTrapezoid, 9, 3.0).unwrap());
        let csco = CscoSpec::continuum(2).with_bound(-1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random_state(g.clone(), csco, &mut rng, 0.5);
        let obs = random_observable(g, csco, &mut rng, 1);
        match from_json::<f64>(&to_json(&rho)).unwrap() {
            Decoded::State(back) => assert_eq!(back.blocks(), rho.blocks()),
            _ => panic!("expected a state"),
        }
        match from_json::<f64>(&to_json(&obs)).unwrap() {
            Decoded::Observable(back) => assert_eq!(back.blocks(), obs.blocks()),
            _ => panic!("expected an observable"),
        }
    }

    #[test]
    fn csv_lists_every_label() {
        let g = Arc::new(SpectrumGrid::build(Scheme::GaussLegendre, 4, 2.0).unwrap());
        let csco = CscoSpec::continuum(3);
        let id = super::super::make_identity(g, csco);
        let csv = diagonal_profile_csv(&id);
        assert_eq!(csv.lines().count(), 1 + 4 * 3);
        assert!(csv.lines().nth(1).unwrap().ends_with(",0,1.000000000000e0"));
    }
}
