//! Line-oriented text format for reaction networks (`.crn` files).
//!
//! ```text
//! # comment
//! species Z1 Z2
//! inputs Z1            # optional; makes the document a computer
//! outputs Z2           # optional; defaults to the complement of inputs
//! Z1 <=> Z2 ; k=1,2    # reversible pair: forward rate, backward rate
//! Z1 -> 0 ; k=0.5      # `0` is the empty complex
//! 2 Z1 + Z2 -> Z1 ; k=3
//! ```
//!
//! Declarations must precede use. `#` starts a comment anywhere in a line.

use std::collections::BTreeSet;
use std::fmt;

use crate::network::{Complex, Crn, ModelError, MsCrc, RateLaw, Reaction, MAX_COEFFICIENT};

/// Parser configuration.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// When set, identifiers not covered by a `species` declaration are
    /// declared on first use, in appearance order.
    pub auto_declare: bool,
}

/// A parse failure with its position (1-based line and column).
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A parsed document: a bare network, or a computer when inputs and/or
/// outputs were declared.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Plain(Crn),
    Computer(MsCrc),
}

impl Network {
    pub fn crn(&self) -> &Crn {
        match self {
            Network::Plain(crn) => crn,
            Network::Computer(c) => c.crn(),
        }
    }

    pub fn as_computer(&self) -> Option<&MsCrc> {
        match self {
            Network::Computer(c) => Some(c),
            Network::Plain(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(String),
    Plus,
    Arrow,
    RevArrow,
    Semi,
    Comma,
    Eq,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Number(s) => format!("number `{s}`"),
            Token::Plus => "`+`".into(),
            Token::Arrow => "`->`".into(),
            Token::RevArrow => "`<=>`".into(),
            Token::Semi => "`;`".into(),
            Token::Comma => "`,`".into(),
            Token::Eq => "`=`".into(),
        }
    }
}

fn lex_line(line: &str, line_no: usize) -> Result<Vec<(Token, usize)>, ParseError> {
    let mut tokens = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let col = i + 1;
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' => i += 1,
            b'#' => break,
            b'+' => {
                tokens.push((Token::Plus, col));
                i += 1;
            }
            b';' => {
                tokens.push((Token::Semi, col));
                i += 1;
            }
            b',' => {
                tokens.push((Token::Comma, col));
                i += 1;
            }
            b'<' => {
                if bytes[i..].starts_with(b"<=>") {
                    tokens.push((Token::RevArrow, col));
                    i += 3;
                } else {
                    return Err(err(line_no, col, "expected `<=>`"));
                }
            }
            b'-' => {
                if bytes[i..].starts_with(b"->") {
                    tokens.push((Token::Arrow, col));
                    i += 2;
                } else {
                    return Err(err(line_no, col, "expected `->`"));
                }
            }
            b'=' => {
                tokens.push((Token::Eq, col));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == b'.'
                        || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                tokens.push((Token::Number(line[start..i].to_string()), col));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(line[start..i].to_string()), col));
            }
            other => {
                return Err(err(
                    line_no,
                    col,
                    format!("unexpected character `{}`", other as char),
                ));
            }
        }
    }
    Ok(tokens)
}

fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        message: message.into(),
    }
}

struct DocBuilder {
    options: ParseOptions,
    names: Vec<String>,
    declared_explicitly: bool,
    inputs: Vec<(String, usize, usize)>,
    outputs: Vec<(String, usize, usize)>,
    reactions: Vec<Reaction>,
}

impl DocBuilder {
    fn lookup(&mut self, name: &str, line: usize, col: usize) -> Result<usize, ParseError> {
        if let Some(id) = self.names.iter().position(|n| n == name) {
            return Ok(id);
        }
        if self.options.auto_declare || !self.declared_explicitly {
            self.names.push(name.to_string());
            Ok(self.names.len() - 1)
        } else {
            Err(err(line, col, format!("unknown species `{name}`")))
        }
    }
}

/// Parses a `.crn` document into a [`Network`].
pub fn parse_network(text: &str, options: &ParseOptions) -> Result<Network, ParseError> {
    let mut doc = DocBuilder {
        options: options.clone(),
        names: Vec::new(),
        declared_explicitly: false,
        inputs: Vec::new(),
        outputs: Vec::new(),
        reactions: Vec::new(),
    };

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let tokens = lex_line(raw_line, line_no)?;
        if tokens.is_empty() {
            continue;
        }
        match &tokens[0].0 {
            Token::Ident(kw) if kw == "species" || kw == "inputs" || kw == "outputs" => {
                parse_declaration(&mut doc, kw.clone(), &tokens[1..], line_no, tokens[0].1)?;
            }
            _ => parse_reaction_line(&mut doc, &tokens, line_no)?,
        }
    }

    finish(doc)
}

fn parse_declaration(
    doc: &mut DocBuilder,
    keyword: String,
    rest: &[(Token, usize)],
    line: usize,
    kw_col: usize,
) -> Result<(), ParseError> {
    if rest.is_empty() {
        return Err(err(line, kw_col, format!("`{keyword}` needs at least one name")));
    }
    let mut ids = Vec::new();
    for (token, col) in rest {
        match token {
            Token::Ident(name) => {
                if keyword == "species" {
                    if doc.names.iter().any(|n| n == name) {
                        return Err(err(line, *col, format!("duplicate species `{name}`")));
                    }
                    doc.names.push(name.clone());
                } else {
                    ids.push((name.clone(), line, *col));
                }
            }
            other => {
                return Err(err(
                    line,
                    *col,
                    format!("expected a species name, found {}", other.describe()),
                ));
            }
        }
    }
    match keyword.as_str() {
        "species" => doc.declared_explicitly = true,
        "inputs" => doc.inputs.extend(ids),
        _ => doc.outputs.extend(ids),
    }
    Ok(())
}

fn parse_reaction_line(
    doc: &mut DocBuilder,
    tokens: &[(Token, usize)],
    line: usize,
) -> Result<(), ParseError> {
    let mut pos = 0;
    let reactant = parse_complex(doc, tokens, &mut pos, line)?;
    let reversible = match tokens.get(pos) {
        Some((Token::Arrow, _)) => false,
        Some((Token::RevArrow, _)) => true,
        Some((other, col)) => {
            return Err(err(
                line,
                *col,
                format!("expected `->` or `<=>`, found {}", other.describe()),
            ));
        }
        None => return Err(err(line, last_col(tokens), "expected `->` or `<=>`")),
    };
    pos += 1;
    let product = parse_complex(doc, tokens, &mut pos, line)?;

    expect(tokens, &mut pos, line, &Token::Semi)?;
    match tokens.get(pos) {
        Some((Token::Ident(k), _)) if k == "k" => pos += 1,
        Some((other, col)) => {
            return Err(err(line, *col, format!("expected `k=`, found {}", other.describe())));
        }
        None => return Err(err(line, last_col(tokens), "expected `k=` after `;`")),
    }
    expect(tokens, &mut pos, line, &Token::Eq)?;

    let first_rate = parse_rate(tokens, &mut pos, line)?;
    let second_rate = if matches!(tokens.get(pos), Some((Token::Comma, _))) {
        pos += 1;
        Some(parse_rate(tokens, &mut pos, line)?)
    } else {
        None
    };
    if let Some((t, col)) = tokens.get(pos) {
        return Err(err(line, *col, format!("trailing {}", t.describe())));
    }

    if reversible && second_rate.is_none() {
        return Err(err(line, last_col(tokens), "`<=>` needs two rates: k=fwd,bwd"));
    }
    if !reversible && second_rate.is_some() {
        return Err(err(line, last_col(tokens), "`->` takes exactly one rate"));
    }

    let build = |reactant: Complex, product: Complex, k: f64| {
        Reaction::new(reactant, product, RateLaw::Constant(k)).map_err(|e| match e {
            ModelError::TrivialReaction => {
                err(line, 1, "reactant and product complexes are identical")
            }
            other => err(line, 1, other.to_string()),
        })
    };
    doc.reactions.push(build(reactant.clone(), product.clone(), first_rate)?);
    if let Some(back) = second_rate {
        doc.reactions.push(build(product, reactant, back)?);
    }
    Ok(())
}

fn last_col(tokens: &[(Token, usize)]) -> usize {
    tokens.last().map(|&(_, c)| c + 1).unwrap_or(1)
}

fn expect(
    tokens: &[(Token, usize)],
    pos: &mut usize,
    line: usize,
    want: &Token,
) -> Result<(), ParseError> {
    match tokens.get(*pos) {
        Some((t, _)) if t == want => {
            *pos += 1;
            Ok(())
        }
        Some((other, col)) => Err(err(
            line,
            *col,
            format!("expected {}, found {}", want.describe(), other.describe()),
        )),
        None => Err(err(line, last_col(tokens), format!("expected {}", want.describe()))),
    }
}

fn parse_complex(
    doc: &mut DocBuilder,
    tokens: &[(Token, usize)],
    pos: &mut usize,
    line: usize,
) -> Result<Complex, ParseError> {
    // Lone `0` is the empty complex.
    if let Some((Token::Number(n), _)) = tokens.get(*pos) {
        if n == "0" && !matches!(tokens.get(*pos + 1), Some((Token::Ident(_), _))) {
            *pos += 1;
            return Ok(Complex::empty());
        }
    }
    let mut pairs: Vec<(usize, u64)> = Vec::new();
    loop {
        let coeff = match tokens.get(*pos) {
            Some((Token::Number(n), col)) => {
                *pos += 1;
                let value: u64 = n
                    .parse()
                    .map_err(|_| err(line, *col, format!("invalid coefficient `{n}`")))?;
                if value == 0 {
                    return Err(err(line, *col, "zero coefficient in a complex"));
                }
                if value > MAX_COEFFICIENT {
                    return Err(err(line, *col, format!("coefficient `{n}` is too large")));
                }
                value
            }
            _ => 1,
        };
        match tokens.get(*pos) {
            Some((Token::Ident(name), col)) => {
                let id = doc.lookup(name, line, *col)?;
                pairs.push((id, coeff));
                *pos += 1;
            }
            Some((other, col)) => {
                return Err(err(
                    line,
                    *col,
                    format!("expected a species name, found {}", other.describe()),
                ));
            }
            None => return Err(err(line, last_col(tokens), "expected a species name")),
        }
        if matches!(tokens.get(*pos), Some((Token::Plus, _))) {
            *pos += 1;
        } else {
            break;
        }
    }
    Complex::from_pairs(pairs).map_err(|e| err(line, 1, e.to_string()))
}

fn parse_rate(tokens: &[(Token, usize)], pos: &mut usize, line: usize) -> Result<f64, ParseError> {
    match tokens.get(*pos) {
        Some((Token::Number(n), col)) => {
            *pos += 1;
            let value: f64 = n
                .parse()
                .map_err(|_| err(line, *col, format!("invalid rate `{n}`")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(err(line, *col, format!("rate must be positive, got `{n}`")));
            }
            Ok(value)
        }
        Some((other, col)) => Err(err(
            line,
            *col,
            format!("expected a rate, found {}", other.describe()),
        )),
        None => Err(err(line, last_col(tokens), "expected a rate")),
    }
}

fn finish(doc: DocBuilder) -> Result<Network, ParseError> {
    let crn = Crn::new(doc.names.clone(), doc.reactions)
        .map_err(|e| err(0, 0, e.to_string()))?;

    if doc.inputs.is_empty() && doc.outputs.is_empty() {
        return Ok(Network::Plain(crn));
    }

    let resolve = |decls: &[(String, usize, usize)]| -> Result<BTreeSet<usize>, ParseError> {
        let mut set = BTreeSet::new();
        for (name, line, col) in decls {
            let id = crn
                .species_index(name)
                .ok_or_else(|| err(*line, *col, format!("unknown species `{name}`")))?;
            set.insert(id);
        }
        Ok(set)
    };
    let inputs = resolve(&doc.inputs)?;
    let outputs = resolve(&doc.outputs)?;

    if let Some(&id) = inputs.intersection(&outputs).next() {
        let name = crn.species_name(id).to_string();
        let (_, line, col) = doc
            .outputs
            .iter()
            .find(|(n, _, _)| *n == name)
            .expect("overlapping declaration");
        return Err(err(*line, *col, format!("`{name}` is both an input and an output")));
    }

    let computer = if inputs.is_empty() {
        let complement = (0..crn.n_species()).filter(|i| !outputs.contains(i)).collect();
        MsCrc::with_io(crn, complement, outputs)
    } else if outputs.is_empty() {
        MsCrc::new(crn, inputs)
    } else {
        MsCrc::with_io(crn, inputs, outputs)
    }
    .map_err(|e| err(0, 0, e.to_string()))?;
    Ok(Network::Computer(computer))
}

fn format_complex_into(out: &mut String, crn: &Crn, complex: &Complex) {
    if complex.is_empty() {
        out.push('0');
        return;
    }
    let mut first = true;
    for (id, coeff) in complex.iter() {
        if !first {
            out.push_str(" + ");
        }
        first = false;
        if coeff != 1 {
            out.push_str(&coeff.to_string());
            out.push(' ');
        }
        out.push_str(crn.species_name(id));
    }
}

/// Renders a complex in the `.crn` term syntax.
pub fn format_complex(crn: &Crn, complex: &Complex) -> String {
    let mut s = String::new();
    format_complex_into(&mut s, crn, complex);
    s
}

/// Renders one reaction in the `.crn` line syntax (constant rates only;
/// time-varying rates render their rate constant).
pub fn format_reaction(crn: &Crn, reaction: &Reaction) -> String {
    let mut s = String::new();
    format_complex_into(&mut s, crn, reaction.reactant());
    s.push_str(" -> ");
    format_complex_into(&mut s, crn, reaction.product());
    let k = match reaction.rate() {
        RateLaw::Constant(k) => *k,
        RateLaw::TimeVarying(m) => m.rate_constant,
    };
    s.push_str(&format!(" ; k={k}"));
    s
}

/// Canonical text for a network. One `->` line per reaction; reversible
/// pairs are left expanded.
pub fn format_network(net: &Network) -> String {
    match net {
        Network::Plain(crn) => format_crn(crn),
        Network::Computer(c) => format_mscrc(c),
    }
}

pub fn format_crn(crn: &Crn) -> String {
    let mut out = String::new();
    if crn.n_species() > 0 {
        out.push_str("species ");
        out.push_str(&crn.species_names().join(" "));
        out.push('\n');
    }
    for reaction in crn.reactions() {
        out.push_str(&format_reaction(crn, reaction));
        out.push('\n');
    }
    out
}

pub fn format_mscrc(computer: &MsCrc) -> String {
    let crn = computer.crn();
    let mut out = String::new();
    out.push_str("species ");
    out.push_str(&crn.species_names().join(" "));
    out.push('\n');
    out.push_str("inputs ");
    out.push_str(&computer.input_names().join(" "));
    out.push('\n');
    out.push_str("outputs ");
    out.push_str(&computer.output_names().join(" "));
    out.push('\n');
    for reaction in crn.reactions() {
        out.push_str(&format_reaction(crn, reaction));
        out.push('\n');
    }
    out
}
