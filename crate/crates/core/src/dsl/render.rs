use super::{Document, Statement};
use crate::tensor::C64;

fn complex(z: C64) -> String {
    match (z.re == 0.0, z.im == 0.0) {
        (_, true) => format!("{}", z.re),
        (true, false) => format!("{}i", z.im),
        _ if z.im < 0.0 => format!("{}-{}i", z.re, -z.im),
        _ => format!("{}+{}i", z.re, z.im),
    }
}

fn vector(v: &[C64]) -> String {
    let parts: Vec<String> = v.iter().map(|&z| complex(z)).collect();
    format!("[{}]", parts.join(", "))
}

/// Source text of a document; parsing it again yields the same document.
pub fn render(doc: &Document) -> String {
    let mut out = String::new();
    for st in &doc.statements {
        let line = match st {
            Statement::System { name, dim } => format!("system {name} dim {dim}"),
            Statement::State { name, values } => format!("state {name} = {}", vector(values)),
            Statement::Operator { name, rows } => {
                let rows: Vec<String> = rows.iter().map(|r| vector(r)).collect();
                format!("operator {name} = [{}]", rows.join(", "))
            }
            Statement::Prepare { systems, state } => format!("prepare {} {state}", systems.join(" ")),
            Statement::Postselect { systems, state } => format!("postselect {} {state}", systems.join(" ")),
            Statement::Unitary { systems, operator } => format!("unitary {} {operator}", systems.join(" ")),
            Statement::MeasureProjective {
                systems,
                operator,
                label,
            } => {
                format!("measure {} projective {operator} as {label}", systems.join(" "))
            }
            Statement::MeasureKraus {
                systems,
                operators,
                label,
            } => {
                let ops: Vec<String> = operators.iter().map(|(l, o)| format!("{l}: {o}")).collect();
                let mut s = format!("measure {} kraus {{{}}}", systems.join(" "), ops.join(", "));
                if let Some(l) = label {
                    s.push_str(&format!(" as {l}"));
                }
                s
            }
            Statement::Measure2 {
                system,
                first,
                second,
                label,
            } => {
                format!(
                    "measure2 {system} {}@{} - {}@{} as {label}",
                    first.0, first.1, second.0, second.1
                )
            }
            Statement::Slot { name } => format!("slot {name}"),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::c64;

    #[test]
    fn complex_forms() {
        assert_eq!(complex(c64(1.5, 0.0)), "1.5");
        assert_eq!(complex(c64(0.0, -2.0)), "-2i");
        assert_eq!(complex(c64(1.0, -2.0)), "1-2i");
        assert_eq!(complex(c64(-1.0, 0.25)), "-1+0.25i");
        assert_eq!(complex(c64(1e-20, 3.0)), "0.00000000000000000001+3i");
    }
}
