//! Random experiment documents for engine cross-checks.
//!
//! Each document has one main system `S` (dimension 2 to `max_dim`) and up
//! to two qubit ancillas. Document `i` uses boundary case `i % 4` for `S`:
//! prepared and post-selected, prepared with an open future, open past and
//! post-selected, or open at both ends with a post-selection followed by a
//! fresh preparation in the middle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsl::{Document, Statement};
use crate::random::{random_kraus_operators, random_projectors, random_state, random_unitary};
use crate::tensor::{DenseTensor, C64};

/// Upper bound on the product of squared period dimensions.
pub const MAX_COST: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCase {
    Closed,
    OpenFuture,
    OpenPast,
    OpenBoth,
}

impl BoundaryCase {
    pub fn of_index(i: usize) -> Self {
        [Self::Closed, Self::OpenFuture, Self::OpenPast, Self::OpenBoth][i % 4]
    }

    fn prepared(self) -> bool {
        matches!(self, Self::Closed | Self::OpenFuture)
    }

    fn postselected(self) -> bool {
        matches!(self, Self::Closed | Self::OpenPast)
    }
}

fn rows(m: &DenseTensor) -> Vec<Vec<C64>> {
    let c = m.dims()[1];
    m.data().chunks(c).map(|r| r.to_vec()).collect()
}

struct Builder {
    doc: Document,
    values: usize,
    labels: usize,
}

impl Builder {
    fn push(&mut self, st: Statement) {
        self.doc.statements.push(st);
    }

    fn state(&mut self, v: DenseTensor) -> String {
        self.values += 1;
        let name = format!("v{}", self.values);
        self.push(Statement::State {
            name: name.clone(),
            values: v.into_data(),
        });
        name
    }

    fn operator(&mut self, m: &DenseTensor) -> String {
        self.values += 1;
        let name = format!("o{}", self.values);
        self.push(Statement::Operator {
            name: name.clone(),
            rows: rows(m),
        });
        name
    }

    fn label(&mut self) -> String {
        self.labels += 1;
        format!("r{}", self.labels)
    }

    fn measure<R: Rng>(&mut self, rng: &mut R, systems: Vec<String>, d: usize) {
        match rng.random_range(0..3) {
            0 => {
                // integer spectrum, possibly degenerate groups
                let groups = rng.random_range(1..=d);
                let projectors = random_projectors(rng, d, groups);
                let mut h = DenseTensor::zeros(vec![d, d]).expect("dims");
                for (g, p) in projectors.iter().enumerate() {
                    h = h.add(&p.scale(C64::from(g as f64 - 1.0))).expect("same dims");
                }
                let op = self.operator(&h);
                let label = self.label();
                self.push(Statement::MeasureProjective {
                    systems,
                    operator: op,
                    label,
                });
            }
            kind => {
                let lumped = kind == 2;
                let count = if lumped {
                    rng.random_range(3..=4)
                } else {
                    rng.random_range(2..=3)
                };
                let ops = random_kraus_operators(rng, d, count);
                let mut operators = Vec::new();
                for (k, m) in ops.iter().enumerate() {
                    let outcome = if lumped {
                        ["a", "b"][k % 2].to_string()
                    } else {
                        format!("k{k}")
                    };
                    operators.push((outcome, self.operator(m)));
                }
                let label = if rng.random_bool(0.5) { Some(self.label()) } else { None };
                self.push(Statement::MeasureKraus {
                    systems,
                    operators,
                    label,
                });
            }
        }
    }
}

/// Document number `index` of the corpus for `seed`.
pub fn generate_one(seed: u64, index: usize, max_dim: usize) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let case = BoundaryCase::of_index(index);
    let d = rng.random_range(2..=max_dim.max(2));
    let mut ancillas = rng.random_range(0..=2usize);
    let mut post_budget = 2 - usize::from(case.postselected());
    let mut mids = match case {
        BoundaryCase::OpenBoth => 1 + usize::from(rng.random_bool(0.3)),
        _ => rng.random_range(0..=post_budget.min(2)),
    };
    let cost = |mids: usize, ancillas: usize| (d * d).pow(mids as u32 + 1) * 16usize.pow(ancillas as u32);
    while cost(mids, ancillas) > MAX_COST {
        if ancillas > 0 {
            ancillas -= 1;
        } else {
            mids -= 1;
        }
    }
    post_budget -= mids;

    let mut b = Builder {
        doc: Document::default(),
        values: 0,
        labels: 0,
    };
    b.push(Statement::System {
        name: "S".into(),
        dim: d,
    });
    let names: Vec<String> = (1..=ancillas).map(|k| format!("A{k}")).collect();
    for a in &names {
        b.push(Statement::System {
            name: a.clone(),
            dim: 2,
        });
    }
    let s = || "S".to_string();

    // initial preparations, an ancilla may start entangled with S
    let mut joint = None;
    if case.prepared() && !names.is_empty() && rng.random_bool(0.5) {
        joint = Some(0);
        let v = b.state(random_state(&mut rng, 2 * d));
        b.push(Statement::Prepare {
            systems: vec![s(), names[0].clone()],
            state: v,
        });
    } else if case.prepared() {
        let v = b.state(random_state(&mut rng, d));
        b.push(Statement::Prepare {
            systems: vec![s()],
            state: v,
        });
    }
    for (k, a) in names.iter().enumerate() {
        if joint != Some(k) {
            let v = b.state(random_state(&mut rng, 2));
            b.push(Statement::Prepare {
                systems: vec![a.clone()],
                state: v,
            });
        }
    }

    let measures = rng.random_range(1..=3usize);
    let mut segment_of: Vec<usize> = (0..measures).map(|_| rng.random_range(0..=mids)).collect();
    segment_of.sort_unstable();
    for seg in 0..=mids {
        if seg > 0 {
            let v = b.state(random_state(&mut rng, d));
            b.push(Statement::Postselect {
                systems: vec![s()],
                state: v,
            });
            let v = b.state(random_state(&mut rng, d));
            b.push(Statement::Prepare {
                systems: vec![s()],
                state: v,
            });
        }
        for _ in segment_of.iter().filter(|&&x| x == seg) {
            if rng.random_bool(0.3) {
                let u = random_unitary(&mut rng, d);
                let op = b.operator(&u);
                b.push(Statement::Unitary {
                    systems: vec![s()],
                    operator: op,
                });
            }
            if !names.is_empty() && rng.random_bool(0.3) {
                let a = names[rng.random_range(0..names.len())].clone();
                b.measure(&mut rng, vec![s(), a], 2 * d);
            } else {
                b.measure(&mut rng, vec![s()], d);
            }
        }
    }

    if case.postselected() {
        let v = b.state(random_state(&mut rng, d));
        b.push(Statement::Postselect {
            systems: vec![s()],
            state: v,
        });
    }
    for a in &names {
        if post_budget > 0 && rng.random_bool(0.5) {
            post_budget -= 1;
            let v = b.state(random_state(&mut rng, 2));
            b.push(Statement::Postselect {
                systems: vec![a.clone()],
                state: v,
            });
        }
    }
    b.doc
}

pub fn generate(seed: u64, count: usize, max_dim: usize) -> Vec<Document> {
    (0..count).map(|i| generate_one(seed, i, max_dim)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, render};

    #[test]
    fn documents_parse_cleanly() {
        for (i, doc) in generate(7, 24, 4).iter().enumerate() {
            let text = render(doc);
            let parsed = parse(&text);
            assert!(parsed.is_ok(), "document {i}:\n{text}\n{:?}", parsed.diagnostics);
            assert_eq!(&parsed.document, doc);
        }
    }

    #[test]
    fn deterministic_per_index() {
        assert_eq!(generate_one(3, 5, 3), generate(3, 6, 3)[5]);
        assert_ne!(generate_one(3, 5, 3), generate_one(4, 5, 3));
    }
}
