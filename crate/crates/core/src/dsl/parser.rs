use std::collections::{BTreeMap, BTreeSet};

use super::{
    record_label, script_diagnostic, to_script, Diagnostic, DiagnosticCode, Document, ScriptDocument, Statement,
};
use crate::kraus::KrausSet;
use crate::kraus::PeriodBinding;
use crate::state::MeasurementPeriod;
use crate::tensor::{c64, hermiticity_deviation, unitarity_deviation, DenseTensor, Tolerance, C64};

use DiagnosticCode::*;

const KEYWORDS: &[&str] = &[
    "system",
    "dim",
    "state",
    "operator",
    "prepare",
    "unitary",
    "measure",
    "measure2",
    "projective",
    "kraus",
    "as",
    "postselect",
    "slot",
];

#[derive(Debug, Clone)]
struct Tok {
    text: String,
    col: usize,
    sym: bool,
}

impl Tok {
    fn is(&self, s: &str) -> bool {
        self.text == s
    }
}

fn tokenize(line: &str) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut word: Option<Tok> = None;
    for (k, ch) in line.chars().enumerate() {
        let col = k + 1;
        if ch.is_whitespace() || "=[]{},:@".contains(ch) {
            toks.extend(word.take());
            if !ch.is_whitespace() {
                toks.push(Tok {
                    text: ch.to_string(),
                    col,
                    sym: true,
                });
            }
        } else {
            word.get_or_insert_with(|| Tok {
                text: String::new(),
                col,
                sym: false,
            })
            .text
            .push(ch);
        }
    }
    toks.extend(word);
    toks
}

fn parse_real(s: &str) -> Option<f64> {
    if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit() || ".eE+-".contains(c)) {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Complex literals `a`, `bi`, `a+bi`, `a-bi` (a bare `i` means `1i`).
pub(crate) fn parse_complex(s: &str) -> Option<C64> {
    let Some(body) = s.strip_suffix('i') else {
        return parse_real(s).map(|re| c64(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (parse_real(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => parse_real(x)?,
    };
    Some(c64(re, im))
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

fn is_outcome_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_.+-".contains(c))
}

struct Parser {
    tol: Tolerance,
    line: usize,
    eol: usize,
    systems: BTreeMap<String, usize>,
    states: BTreeMap<String, usize>,
    operators: BTreeMap<String, DenseTensor>,
    records: BTreeSet<String>,
    slots: BTreeSet<String>,
    measures: usize,
}

type Res<T> = Result<T, Diagnostic>;

impl Parser {
    fn err<T>(&self, col: usize, code: DiagnosticCode, message: impl Into<String>) -> Res<T> {
        Err(Diagnostic {
            line: self.line,
            col,
            code,
            message: message.into(),
        })
    }

    fn at<'t>(&self, toks: &'t [Tok], k: usize, what: &str) -> Res<&'t Tok> {
        match toks.get(k) {
            Some(t) => Ok(t),
            None => self.err(self.eol, SyntaxError, format!("expected {what}")),
        }
    }

    fn ident(&self, toks: &[Tok], k: usize, what: &str) -> Res<String> {
        let t = self.at(toks, k, what)?;
        if t.sym || !is_ident(&t.text) {
            return self.err(t.col, SyntaxError, format!("expected {what}, found '{}'", t.text));
        }
        Ok(t.text.clone())
    }

    fn keyword(&self, toks: &[Tok], k: usize, kw: &str) -> Res<()> {
        let t = self.at(toks, k, &format!("'{kw}'"))?;
        if !t.is(kw) {
            return self.err(t.col, SyntaxError, format!("expected '{kw}', found '{}'", t.text));
        }
        Ok(())
    }

    fn end(&self, toks: &[Tok], k: usize) -> Res<()> {
        match toks.get(k) {
            Some(t) => self.err(t.col, SyntaxError, format!("unexpected '{}'", t.text)),
            None => Ok(()),
        }
    }

    fn system_list(&self, toks: &[Tok]) -> Res<(Vec<String>, usize)> {
        let mut seen = BTreeSet::new();
        let mut d = 1;
        for t in toks {
            if t.sym || !is_ident(&t.text) {
                return self.err(
                    t.col,
                    SyntaxError,
                    format!("expected a system name, found '{}'", t.text),
                );
            }
            let Some(&dim) = self.systems.get(&t.text) else {
                return self.err(t.col, UnknownSystem, format!("system '{}' is not declared", t.text));
            };
            if !seen.insert(t.text.clone()) {
                return self.err(t.col, SyntaxError, format!("system '{}' listed twice", t.text));
            }
            d *= dim;
        }
        if toks.is_empty() {
            return self.err(self.eol, SyntaxError, "expected a system name");
        }
        Ok((toks.iter().map(|t| t.text.clone()).collect(), d))
    }

    fn operator(&self, t: &Tok, d: usize) -> Res<&DenseTensor> {
        if t.sym || !is_ident(&t.text) {
            return self.err(
                t.col,
                SyntaxError,
                format!("expected an operator name, found '{}'", t.text),
            );
        }
        let Some(m) = self.operators.get(&t.text) else {
            return self.err(t.col, UnknownName, format!("operator '{}' is not defined", t.text));
        };
        if m.dims() != [d, d] {
            return self.err(
                t.col,
                DimensionMismatch,
                format!(
                    "operator '{}' is {}x{}, expected {d}x{d}",
                    t.text,
                    m.dims()[0],
                    m.dims()[1]
                ),
            );
        }
        Ok(m)
    }

    fn hermitian(&self, t: &Tok, m: &DenseTensor) -> Res<()> {
        let dev = hermiticity_deviation(m).expect("square");
        if dev > self.tol.eq_tol {
            return self.err(
                t.col,
                NotHermitian,
                format!("operator '{}' is not Hermitian (deviation {dev:.3e})", t.text),
            );
        }
        Ok(())
    }

    fn state_ref(&self, t: &Tok, d: usize) -> Res<String> {
        if t.sym || !is_ident(&t.text) {
            return self.err(t.col, SyntaxError, format!("expected a state name, found '{}'", t.text));
        }
        let Some(&len) = self.states.get(&t.text) else {
            return self.err(t.col, UnknownName, format!("state '{}' is not defined", t.text));
        };
        if len != d {
            return self.err(
                t.col,
                DimensionMismatch,
                format!("state '{}' has {len} amplitudes, expected {d}", t.text),
            );
        }
        Ok(t.text.clone())
    }

    fn record(&self, t: &Tok, label: &str) -> Res<()> {
        if self.records.contains(label) {
            return self.err(t.col, DuplicateName, format!("record label '{label}' is already used"));
        }
        Ok(())
    }

    fn new_value_name(&self, toks: &[Tok]) -> Res<String> {
        let name = self.ident(toks, 1, "a name")?;
        if self.states.contains_key(&name) || self.operators.contains_key(&name) {
            return self.err(toks[1].col, DuplicateName, format!("'{name}' is already defined"));
        }
        self.keyword(toks, 2, "=")?;
        Ok(name)
    }

    /// `[ elem, elem, ... ]` starting at `toks[k]`; returns elements and the
    /// index after the closing bracket.
    fn vector(&self, toks: &[Tok], mut k: usize) -> Res<(Vec<C64>, usize)> {
        self.keyword(toks, k, "[")?;
        k += 1;
        let mut values = Vec::new();
        loop {
            let start = self.at(toks, k, "a number")?;
            let mut text = String::new();
            while let Some(t) = toks.get(k).filter(|t| !t.sym) {
                text.push_str(&t.text);
                k += 1;
            }
            if text.is_empty() {
                return self.err(
                    start.col,
                    SyntaxError,
                    format!("expected a number, found '{}'", start.text),
                );
            }
            match parse_complex(&text) {
                Some(z) => values.push(z),
                None => return self.err(start.col, SyntaxError, format!("invalid complex number '{text}'")),
            }
            let t = self.at(toks, k, "',' or ']'")?;
            k += 1;
            match t.text.as_str() {
                "," => continue,
                "]" => return Ok((values, k)),
                _ => return self.err(t.col, SyntaxError, format!("expected ',' or ']', found '{}'", t.text)),
            }
        }
    }

    fn statement(&mut self, toks: &[Tok]) -> Res<Statement> {
        let head = &toks[0];
        match head.text.as_str() {
            "system" => {
                let name = self.ident(toks, 1, "a system name")?;
                if self.systems.contains_key(&name) {
                    return self.err(
                        toks[1].col,
                        DuplicateName,
                        format!("system '{name}' is already declared"),
                    );
                }
                self.keyword(toks, 2, "dim")?;
                let t = self.at(toks, 3, "a dimension")?;
                let dim = match t.text.parse::<usize>() {
                    Ok(d) if d >= 1 && t.text.chars().all(|c| c.is_ascii_digit()) => d,
                    _ => {
                        return self.err(
                            t.col,
                            SyntaxError,
                            format!("dimension must be a positive integer, found '{}'", t.text),
                        )
                    }
                };
                self.end(toks, 4)?;
                self.systems.insert(name.clone(), dim);
                Ok(Statement::System { name, dim })
            }
            "state" => {
                let name = self.new_value_name(toks)?;
                let (values, k) = self.vector(toks, 3)?;
                self.end(toks, k)?;
                self.states.insert(name.clone(), values.len());
                Ok(Statement::State { name, values })
            }
            "operator" => {
                let name = self.new_value_name(toks)?;
                self.keyword(toks, 3, "[")?;
                let mut k = 4;
                let mut rows: Vec<Vec<C64>> = Vec::new();
                loop {
                    let row_tok = self.at(toks, k, "'['")?.clone();
                    let (row, next) = self.vector(toks, k)?;
                    if let Some(first) = rows.first() {
                        if first.len() != row.len() {
                            return self.err(
                                row_tok.col,
                                DimensionMismatch,
                                format!("row has {} entries, expected {}", row.len(), first.len()),
                            );
                        }
                    }
                    rows.push(row);
                    let t = self.at(toks, next, "',' or ']'")?;
                    k = next + 1;
                    match t.text.as_str() {
                        "," => continue,
                        "]" => break,
                        _ => return self.err(t.col, SyntaxError, format!("expected ',' or ']', found '{}'", t.text)),
                    }
                }
                self.end(toks, k)?;
                let m = DenseTensor::from_rows(&rows).expect("rectangular");
                self.operators.insert(name.clone(), m);
                Ok(Statement::Operator { name, rows })
            }
            "prepare" | "postselect" => {
                if toks.len() < 3 {
                    return self.err(self.eol, SyntaxError, "expected systems followed by a state name");
                }
                let (systems, d) = self.system_list(&toks[1..toks.len() - 1])?;
                let state = self.state_ref(&toks[toks.len() - 1], d)?;
                Ok(if head.is("prepare") {
                    Statement::Prepare { systems, state }
                } else {
                    Statement::Postselect { systems, state }
                })
            }
            "unitary" => {
                if toks.len() < 3 {
                    return self.err(self.eol, SyntaxError, "expected systems followed by an operator name");
                }
                let (systems, d) = self.system_list(&toks[1..toks.len() - 1])?;
                let t = &toks[toks.len() - 1];
                let m = self.operator(t, d)?;
                let dev = unitarity_deviation(m).expect("square");
                if dev > self.tol.eq_tol {
                    return self.err(
                        t.col,
                        NotUnitary,
                        format!("operator '{}' is not unitary (deviation {dev:.3e})", t.text),
                    );
                }
                Ok(Statement::Unitary {
                    systems,
                    operator: t.text.clone(),
                })
            }
            "measure" => self.measure(toks),
            "measure2" => {
                let system = self.ident(toks, 1, "a system name")?;
                let (_, d) = self.system_list(&toks[1..2])?;
                let term = |k: usize| -> Res<(String, String)> {
                    let t = self.at(toks, k, "an operator name")?;
                    let m = self.operator(t, d)?;
                    self.hermitian(t, m)?;
                    self.keyword(toks, k + 1, "@")?;
                    let slot = self.ident(toks, k + 2, "a slot name")?;
                    if !self.slots.contains(&slot) {
                        return self.err(toks[k + 2].col, UnknownName, format!("slot '{slot}' is not defined"));
                    }
                    Ok((t.text.clone(), slot))
                };
                let first = term(2)?;
                self.keyword(toks, 5, "-")?;
                let second = term(6)?;
                if first.1 == second.1 {
                    return self.err(toks[8].col, SyntaxError, "the two slots must differ");
                }
                self.keyword(toks, 9, "as")?;
                let label = self.ident(toks, 10, "a record label")?;
                self.record(&toks[10], &label)?;
                self.end(toks, 11)?;
                Ok(Statement::Measure2 {
                    system,
                    first,
                    second,
                    label,
                })
            }
            "slot" => {
                let name = self.ident(toks, 1, "a slot name")?;
                if self.slots.contains(&name) {
                    return self.err(toks[1].col, DuplicateName, format!("slot '{name}' is already defined"));
                }
                self.end(toks, 2)?;
                Ok(Statement::Slot { name })
            }
            other => self.err(head.col, SyntaxError, format!("unknown statement '{other}'")),
        }
    }

    fn measure(&mut self, toks: &[Tok]) -> Res<Statement> {
        let Some(kind) = toks.iter().position(|t| t.is("projective") || t.is("kraus")) else {
            return self.err(self.eol, SyntaxError, "expected 'projective' or 'kraus'");
        };
        let (systems, d) = self.system_list(&toks[1..kind])?;
        if toks[kind].is("projective") {
            let t = self.at(toks, kind + 1, "an operator name")?;
            let m = self.operator(t, d)?;
            self.hermitian(t, m)?;
            self.keyword(toks, kind + 2, "as")?;
            let label = self.ident(toks, kind + 3, "a record label")?;
            self.record(&toks[kind + 3], &label)?;
            self.end(toks, kind + 4)?;
            return Ok(Statement::MeasureProjective {
                systems,
                operator: t.text.clone(),
                label,
            });
        }
        self.keyword(toks, kind + 1, "{")?;
        let mut k = kind + 2;
        let mut operators = Vec::new();
        let mut mats = Vec::new();
        loop {
            let lt = self.at(toks, k, "an outcome label")?;
            if lt.sym || !is_outcome_label(&lt.text) {
                return self.err(
                    lt.col,
                    SyntaxError,
                    format!("expected an outcome label, found '{}'", lt.text),
                );
            }
            self.keyword(toks, k + 1, ":")?;
            let ot = self.at(toks, k + 2, "an operator name")?;
            mats.push(self.operator(ot, d)?.clone());
            operators.push((lt.text.clone(), ot.text.clone()));
            let sep = self.at(toks, k + 3, "',' or '}'")?;
            k += 4;
            match sep.text.as_str() {
                "," => continue,
                "}" => break,
                _ => {
                    return self.err(
                        sep.col,
                        SyntaxError,
                        format!("expected ',' or '}}', found '{}'", sep.text),
                    )
                }
            }
        }
        let label = if toks.get(k).is_some() {
            self.keyword(toks, k, "as")?;
            let l = self.ident(toks, k + 1, "a record label")?;
            self.end(toks, k + 2)?;
            Some(l)
        } else {
            None
        };
        let effective = label.clone().unwrap_or_else(|| format!("m{}", self.measures + 1));
        self.record(toks.get(k + 1).unwrap_or(&toks[0]), &effective)?;
        let outcomes = mats
            .into_iter()
            .enumerate()
            .map(|(i, m)| (i.to_string(), vec![m]))
            .collect();
        let set = KrausSet::new_unchecked(
            vec![PeriodBinding::square(MeasurementPeriod::closed("_", "a", "b"), d)],
            outcomes,
        )
        .expect("shapes checked");
        let c = set.check_complete(self.tol);
        if !c.complete {
            return self.err(
                toks[kind + 1].col,
                IncompleteKraus,
                format!(
                    "Kraus operators do not resolve the identity (deviation {:.3e})",
                    c.max_deviation
                ),
            );
        }
        Ok(Statement::MeasureKraus {
            systems,
            operators,
            label,
        })
    }
}

/// Parses with the default tolerance.
pub fn parse(text: &str) -> ScriptDocument {
    parse_with(text, Tolerance::default())
}

/// Parses every line, collecting all diagnostics. When the statements are
/// individually valid the whole script is checked as well.
pub fn parse_with(text: &str, tol: Tolerance) -> ScriptDocument {
    let mut p = Parser {
        tol,
        line: 0,
        eol: 1,
        systems: BTreeMap::new(),
        states: BTreeMap::new(),
        operators: BTreeMap::new(),
        records: BTreeSet::new(),
        slots: BTreeSet::new(),
        measures: 0,
    };
    let mut document = Document::default();
    let mut lines = Vec::new();
    let mut diagnostics = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let code = raw.split('#').next().unwrap_or("");
        let toks = tokenize(code);
        if toks.is_empty() {
            continue;
        }
        p.line = k + 1;
        p.eol = code.trim_end().chars().count() + 1;
        match p.statement(&toks) {
            Ok(st) => {
                if matches!(
                    st,
                    Statement::MeasureProjective { .. } | Statement::MeasureKraus { .. } | Statement::Measure2 { .. }
                ) {
                    p.measures += 1;
                    p.records.insert(record_label(&st, p.measures).expect("measure"));
                }
                if let Statement::Slot { name } = &st {
                    p.slots.insert(name.clone());
                }
                document.statements.push(st);
                lines.push(k + 1);
            }
            Err(d) => diagnostics.push(d),
        }
    }
    if diagnostics.is_empty() {
        if let Err((k, e)) = to_script(&document, tol) {
            diagnostics.push(script_diagnostic(&lines, k, e));
        }
    }
    ScriptDocument {
        source: text.to_owned(),
        document,
        lines,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1"), Some(c64(1.0, 0.0)));
        assert_eq!(parse_complex("-2.5i"), Some(c64(0.0, -2.5)));
        assert_eq!(parse_complex("1+2i"), Some(c64(1.0, 2.0)));
        assert_eq!(parse_complex("1-2i"), Some(c64(1.0, -2.0)));
        assert_eq!(parse_complex("1e-3-2e+1i"), Some(c64(1e-3, -20.0)));
        assert_eq!(parse_complex("-i"), Some(c64(0.0, -1.0)));
        assert_eq!(parse_complex("i"), Some(c64(0.0, 1.0)));
        assert_eq!(parse_complex("inf"), None);
        assert_eq!(parse_complex("1+"), None);
        assert_eq!(parse_complex("x"), None);
    }

    #[test]
    fn tokens_carry_columns() {
        let t = tokenize("state u = [1, 2i]");
        let cols: Vec<(String, usize)> = t.iter().map(|t| (t.text.clone(), t.col)).collect();
        assert_eq!(cols[3], ("[".to_string(), 11));
        assert_eq!(cols[6], ("2i".to_string(), 15));
    }

    #[test]
    fn minimal_document() {
        let doc = parse(
            "system S dim 2\nstate up = [1, 0]\noperator sz = [[1, 0], [0, -1]]\nprepare S up\nmeasure S projective sz as z\n",
        );
        assert!(doc.diagnostics.is_empty(), "{:?}", doc.diagnostics);
        assert_eq!(doc.document.statements.len(), 5);
    }

    #[test]
    fn unknown_system_position() {
        let doc = parse("system S dim 2\nstate up = [1, 0]\nprepare X up\n");
        assert_eq!(doc.diagnostics.len(), 1);
        let d = &doc.diagnostics[0];
        assert_eq!((d.line, d.col, d.code), (3, 9, UnknownSystem));
    }

    #[test]
    fn wrong_amplitude_count() {
        let doc = parse("system S dim 2\nstate u = [1, 0, 0]\nprepare S u\n");
        let d = &doc.diagnostics[0];
        assert_eq!((d.line, d.code), (3, DimensionMismatch));
        assert!(d.message.contains("3 amplitudes, expected 2"), "{}", d.message);
    }

    #[test]
    fn collects_several_diagnostics() {
        let doc = parse("system S dim 2\nfoo bar\nstate u = [1, x]\nprepare S v\n");
        let codes: Vec<_> = doc.diagnostics.iter().map(|d| (d.line, d.code)).collect();
        assert_eq!(codes, vec![(2, SyntaxError), (3, SyntaxError), (4, UnknownName)]);
    }
}
