//! Content-stream tokenizer and a small interpreter that tracks just enough
//! graphics and text state to recover positioned text blocks and image
//! placements.
//!
//! The tokenizer stops at the first syntax error and hands back every
//! operation decoded up to that point, so a damaged stream still yields its
//! leading text.

use std::collections::HashMap;

use lopdf::Encoding;
use lopdf::{Dictionary, Document, Object, ObjectId};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Operand {
    Number(f64),
    Str(Vec<u8>),
    Name(Vec<u8>),
    Array(Vec<Operand>),
    Dict,
    Bool(bool),
    Null,
}

impl Operand {
    fn as_f64(&self) -> Option<f64> {
        match self {
            Operand::Number(n) => Some(*n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Operation {
    pub operator: String,
    pub operands: Vec<Operand>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

fn is_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n' | b'\x0c' | b'\0')
}

fn is_delimiter(b: u8) -> bool {
    matches!(
        b,
        b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%'
    )
}

struct Lexer<'a> {
    data: &'a [u8],
    pos: usize,
}

enum Token {
    Operand(Operand),
    ArrayEnd,
    DictEnd,
    Keyword(Vec<u8>),
}

impl<'a> Lexer<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_space(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if is_whitespace(b) {
                self.pos += 1;
            } else if b == b'%' {
                while self.pos < self.data.len() && !matches!(self.data[self.pos], b'\r' | b'\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>, SyntaxError> {
        self.skip_space();
        let Some(&b) = self.data.get(self.pos) else {
            return Ok(None);
        };
        let tok = match b {
            b'(' => Token::Operand(Operand::Str(self.literal_string()?)),
            b'<' if self.data.get(self.pos + 1) == Some(&b'<') => {
                self.pos += 2;
                self.skip_dict()?;
                Token::Operand(Operand::Dict)
            }
            b'<' => Token::Operand(Operand::Str(self.hex_string()?)),
            b'>' if self.data.get(self.pos + 1) == Some(&b'>') => {
                self.pos += 2;
                Token::DictEnd
            }
            b'[' => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    match self.next_token()? {
                        Some(Token::Operand(o)) => items.push(o),
                        Some(Token::ArrayEnd) => break,
                        Some(Token::Keyword(k)) => items.push(keyword_operand(&k)),
                        Some(Token::DictEnd) => return self.err("unexpected '>>' in array"),
                        None => return self.err("unterminated array"),
                    }
                }
                Token::Operand(Operand::Array(items))
            }
            b']' => {
                self.pos += 1;
                Token::ArrayEnd
            }
            b'/' => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.data.len()
                    && !is_whitespace(self.data[self.pos])
                    && !is_delimiter(self.data[self.pos])
                {
                    self.pos += 1;
                }
                Token::Operand(Operand::Name(self.data[start..self.pos].to_vec()))
            }
            b')' | b'>' | b'{' | b'}' => return self.err(format!("unexpected '{}'", b as char)),
            _ => {
                let start = self.pos;
                while self.pos < self.data.len()
                    && !is_whitespace(self.data[self.pos])
                    && !is_delimiter(self.data[self.pos])
                {
                    self.pos += 1;
                }
                let word = &self.data[start..self.pos];
                if word.first().is_some_and(|c| c.is_ascii_digit() || matches!(c, b'+' | b'-' | b'.')) {
                    match std::str::from_utf8(word).ok().and_then(parse_number) {
                        Some(n) => Token::Operand(Operand::Number(n)),
                        None => {
                            self.pos = start;
                            return self.err(format!(
                                "bad number {:?}",
                                String::from_utf8_lossy(word)
                            ));
                        }
                    }
                } else {
                    Token::Keyword(word.to_vec())
                }
            }
        };
        Ok(Some(tok))
    }

    fn literal_string(&mut self) -> Result<Vec<u8>, SyntaxError> {
        debug_assert_eq!(self.data[self.pos], b'(');
        self.pos += 1;
        let mut out = Vec::new();
        let mut depth = 1usize;
        while let Some(&b) = self.data.get(self.pos) {
            self.pos += 1;
            match b {
                b'\\' => {
                    let Some(&e) = self.data.get(self.pos) else { break };
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(0x08),
                        b'f' => out.push(0x0c),
                        b'\r' => {
                            if self.data.get(self.pos) == Some(&b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'\n' => {}
                        b'0'..=b'7' => {
                            let mut v = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.data.get(self.pos) {
                                    Some(&d @ b'0'..=b'7') => {
                                        v = v * 8 + (d - b'0') as u32;
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push((v & 0xff) as u8);
                        }
                        other => out.push(other),
                    }
                }
                b'(' => {
                    depth += 1;
                    out.push(b);
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(out);
                    }
                    out.push(b);
                }
                _ => out.push(b),
            }
        }
        self.err("unterminated string")
    }

    fn hex_string(&mut self) -> Result<Vec<u8>, SyntaxError> {
        self.pos += 1;
        let mut digits = Vec::new();
        while let Some(&b) = self.data.get(self.pos) {
            self.pos += 1;
            if b == b'>' {
                if digits.len() % 2 == 1 {
                    digits.push(0);
                }
                return Ok(digits.chunks(2).map(|p| p[0] << 4 | p[1]).collect());
            }
            if is_whitespace(b) {
                continue;
            }
            match (b as char).to_digit(16) {
                Some(d) => digits.push(d as u8),
                None => {
                    self.pos -= 1;
                    return self.err("invalid hex digit");
                }
            }
        }
        self.err("unterminated hex string")
    }

    fn skip_dict(&mut self) -> Result<(), SyntaxError> {
        loop {
            match self.next_token()? {
                Some(Token::DictEnd) => return Ok(()),
                Some(_) => {}
                None => return self.err("unterminated dictionary"),
            }
        }
    }

    /// Skips the binary payload of an inline image; `pos` sits just after `ID`.
    fn skip_inline_image(&mut self) -> Result<(), SyntaxError> {
        if self.data.get(self.pos).is_some_and(|&b| is_whitespace(b)) {
            self.pos += 1;
        }
        let rest = &self.data[self.pos..];
        let mut i = 0;
        while i + 2 <= rest.len() {
            if &rest[i..i + 2] == b"EI"
                && (i == 0 || is_whitespace(rest[i - 1]))
                && rest.get(i + 2).is_none_or(|&b| is_whitespace(b) || is_delimiter(b))
            {
                self.pos += i + 2;
                return Ok(());
            }
            i += 1;
        }
        self.err("inline image without EI")
    }
}

fn keyword_operand(k: &[u8]) -> Operand {
    match k {
        b"true" => Operand::Bool(true),
        b"false" => Operand::Bool(false),
        _ => Operand::Null,
    }
}

fn parse_number(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    // Producers occasionally emit "--5" or "5." variants.
    let trimmed = s.trim_start_matches(['+', '-']);
    let neg = s.starts_with('-');
    trimmed
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(|v| if neg { -v } else { v })
}

/// Tokenizes a content stream into operations.
pub(crate) fn parse_operations(data: &[u8]) -> (Vec<Operation>, Option<SyntaxError>) {
    let mut lexer = Lexer { data, pos: 0 };
    let mut ops = Vec::new();
    let mut operands = Vec::new();
    loop {
        match lexer.next_token() {
            Ok(None) => return (ops, None),
            Ok(Some(Token::Operand(o))) => operands.push(o),
            Ok(Some(Token::Keyword(k))) => match k.as_slice() {
                b"true" | b"false" | b"null" => operands.push(keyword_operand(&k)),
                b"BI" => {
                    operands.clear();
                    // Inline image dictionary runs up to ID.
                    loop {
                        match lexer.next_token() {
                            Ok(Some(Token::Keyword(k))) if k == b"ID" => break,
                            Ok(Some(_)) => {}
                            Ok(None) => {
                                return (ops, Some(SyntaxError {
                                    offset: lexer.pos,
                                    message: "inline image without ID".into(),
                                }))
                            }
                            Err(e) => return (ops, Some(e)),
                        }
                    }
                    if let Err(e) = lexer.skip_inline_image() {
                        return (ops, Some(e));
                    }
                }
                _ => ops.push(Operation {
                    operator: String::from_utf8_lossy(&k).into_owned(),
                    operands: std::mem::take(&mut operands),
                }),
            },
            Ok(Some(Token::ArrayEnd)) => {
                return (ops, Some(SyntaxError {
                    offset: lexer.pos,
                    message: "unexpected ']'".into(),
                }))
            }
            Ok(Some(Token::DictEnd)) => {
                return (ops, Some(SyntaxError {
                    offset: lexer.pos,
                    message: "unexpected '>>'".into(),
                }))
            }
            Err(e) => return (ops, Some(e)),
        }
    }
}

/// Affine transform `[a b c d e f]` in PDF row-vector convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Matrix([f64; 6]);

impl Matrix {
    pub const IDENTITY: Matrix = Matrix([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);

    fn from_operands(ops: &[Operand]) -> Option<Matrix> {
        if ops.len() != 6 {
            return None;
        }
        let mut m = [0.0; 6];
        for (slot, o) in m.iter_mut().zip(ops) {
            *slot = o.as_f64()?;
        }
        Some(Matrix(m))
    }

    fn from_object(obj: &Object) -> Option<Matrix> {
        let arr = obj.as_array().ok()?;
        if arr.len() != 6 {
            return None;
        }
        let mut m = [0.0; 6];
        for (slot, o) in m.iter_mut().zip(arr) {
            *slot = o.as_float().ok()? as f64;
        }
        Some(Matrix(m))
    }

    fn translate(tx: f64, ty: f64) -> Matrix {
        Matrix([1.0, 0.0, 0.0, 1.0, tx, ty])
    }

    /// `self × other`: apply `self` first, then `other`.
    pub fn then(&self, other: &Matrix) -> Matrix {
        let [a, b, c, d, e, f] = self.0;
        let [a2, b2, c2, d2, e2, f2] = other.0;
        Matrix([
            a * a2 + b * c2,
            a * b2 + b * d2,
            c * a2 + d * c2,
            c * b2 + d * d2,
            e * a2 + f * c2 + e2,
            e * b2 + f * d2 + f2,
        ])
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let [a, b, c, d, e, f] = self.0;
        (a * x + c * y + e, b * x + d * y + f)
    }

    pub fn inverse(&self) -> Option<Matrix> {
        let [a, b, c, d, e, f] = self.0;
        let det = a * d - b * c;
        if det.abs() < 1e-12 {
            return None;
        }
        let (ia, ib, ic, id) = (d / det, -b / det, -c / det, a / det);
        Some(Matrix([ia, ib, ic, id, -(e * ia + f * ic), -(e * ib + f * id)]))
    }

    fn scale_y(&self) -> f64 {
        let [_, _, c, d, _, _] = self.0;
        (c * c + d * d).sqrt()
    }
}

/// A text object (BT..ET) with the user-space position of its first glyph.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawBlock {
    pub text: String,
    pub x: f64,
    pub y: f64,
}

/// An image XObject painted with the given CTM (unit square → user space).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Placement {
    pub object: ObjectId,
    pub ctm: Matrix,
}

#[derive(Debug, Default)]
pub(crate) struct PageContent {
    pub blocks: Vec<RawBlock>,
    pub placements: Vec<Placement>,
    pub errors: Vec<SyntaxError>,
}

/// Resource dictionaries in lookup precedence order.
#[derive(Clone)]
pub(crate) struct Resources<'a> {
    dicts: Vec<&'a Dictionary>,
}

impl<'a> Resources<'a> {
    pub fn for_page(doc: &'a Document, page: ObjectId) -> Resources<'a> {
        let mut dicts = Vec::new();
        if let Ok((inline, ids)) = doc.get_page_resources(page) {
            dicts.extend(inline);
            dicts.extend(ids.into_iter().filter_map(|id| doc.get_dictionary(id).ok()));
        }
        Resources { dicts }
    }

    fn from_dict(doc: &'a Document, dict: &'a Dictionary) -> Resources<'a> {
        let dicts = match dict.get(b"Resources") {
            Ok(Object::Dictionary(d)) => vec![d],
            Ok(Object::Reference(id)) => doc.get_dictionary(*id).ok().into_iter().collect(),
            _ => Vec::new(),
        };
        Resources { dicts }
    }

    fn category(&self, doc: &'a Document, category: &[u8]) -> Vec<&'a Dictionary> {
        self.dicts
            .iter()
            .filter_map(|d| match d.get(category) {
                Ok(Object::Dictionary(c)) => Some(c),
                Ok(Object::Reference(id)) => doc.get_dictionary(*id).ok(),
                _ => None,
            })
            .collect()
    }

    /// Looks up a named resource, returning its object id when indirect.
    pub fn lookup(
        &self,
        doc: &'a Document,
        category: &[u8],
        name: &[u8],
    ) -> Option<(Option<ObjectId>, &'a Object)> {
        self.category(doc, category).into_iter().find_map(|c| {
            let obj = c.get(name).ok()?;
            match obj {
                Object::Reference(id) => doc.get_object(*id).ok().map(|o| (Some(*id), o)),
                other => Some((None, other)),
            }
        })
    }

    /// Every indirect entry in a category, in declaration order.
    pub fn entries(&self, doc: &'a Document, category: &[u8]) -> Vec<ObjectId> {
        let mut out = Vec::new();
        for c in self.category(doc, category) {
            for (_, v) in c.iter() {
                if let Object::Reference(id) = v {
                    if !out.contains(id) {
                        out.push(*id);
                    }
                }
            }
        }
        out
    }
}

struct FontInfo<'a> {
    encoding: Option<Encoding<'a>>,
    two_byte: bool,
    first_char: i64,
    widths: Vec<f64>,
}

impl<'a> FontInfo<'a> {
    fn load(doc: &'a Document, dict: &'a Dictionary) -> FontInfo<'a> {
        let two_byte = dict.get(b"Subtype").and_then(Object::as_name).ok() == Some(b"Type0");
        let encoding = if dict.type_is(b"Font") || dict.has(b"Subtype") {
            dict.get_font_encoding(doc).ok()
        } else {
            None
        };
        let first_char = dict.get(b"FirstChar").and_then(Object::as_i64).unwrap_or(0);
        let widths = dict
            .get_deref(b"Widths", doc)
            .and_then(Object::as_array)
            .map(|a| {
                a.iter()
                    .map(|w| w.as_float().map(|v| v as f64).unwrap_or(500.0))
                    .collect()
            })
            .unwrap_or_default();
        FontInfo {
            encoding,
            two_byte,
            first_char,
            widths,
        }
    }

    fn decode(&self, bytes: &[u8]) -> String {
        if let Some(enc) = &self.encoding {
            if let Ok(s) = Document::decode_text(enc, bytes) {
                return s;
            }
        }
        if self.two_byte {
            bytes
                .chunks(2)
                .filter_map(|c| {
                    let code = if c.len() == 2 { (c[0] as u32) << 8 | c[1] as u32 } else { c[0] as u32 };
                    char::from_u32(code)
                })
                .collect()
        } else {
            bytes.iter().map(|&b| b as char).collect()
        }
    }

    /// Advance of a string in thousandths of an em.
    fn advance(&self, bytes: &[u8]) -> f64 {
        if self.two_byte {
            return bytes.len().div_ceil(2) as f64 * 500.0;
        }
        bytes
            .iter()
            .map(|&b| {
                let i = b as i64 - self.first_char;
                if i >= 0 {
                    self.widths.get(i as usize).copied().unwrap_or(500.0)
                } else {
                    500.0
                }
            })
            .sum()
    }
}

#[derive(Clone)]
struct TextState {
    font: Option<Vec<u8>>,
    size: f64,
    leading: f64,
    char_spacing: f64,
    word_spacing: f64,
    h_scale: f64,
}

impl Default for TextState {
    fn default() -> Self {
        TextState {
            font: None,
            size: 0.0,
            leading: 0.0,
            char_spacing: 0.0,
            word_spacing: 0.0,
            h_scale: 1.0,
        }
    }
}

struct OpenBlock {
    text: String,
    x: f64,
    y: f64,
    // End of the last shown run, user space.
    last: Option<(f64, f64, f64)>,
}

struct Interpreter<'a> {
    doc: &'a Document,
    fonts: HashMap<Vec<u8>, FontInfo<'a>>,
    out: PageContent,
}

const MAX_FORM_DEPTH: usize = 8;

impl<'a> Interpreter<'a> {
    fn font(&mut self, res: &Resources<'a>, name: &[u8]) -> Option<&FontInfo<'a>> {
        if !self.fonts.contains_key(name) {
            let (_, obj) = res.lookup(self.doc, b"Font", name)?;
            let dict = obj.as_dict().ok()?;
            self.fonts.insert(name.to_vec(), FontInfo::load(self.doc, dict));
        }
        self.fonts.get(name)
    }

    fn run(&mut self, data: &[u8], res: &Resources<'a>, base_ctm: Matrix, depth: usize) {
        let (ops, err) = parse_operations(data);
        if let Some(e) = err {
            self.out.errors.push(e);
        }
        let mut ctm = base_ctm;
        let mut stack: Vec<(Matrix, TextState)> = Vec::new();
        let mut ts = TextState::default();
        let mut tm = Matrix::IDENTITY;
        let mut tlm = Matrix::IDENTITY;
        let mut block: Option<OpenBlock> = None;

        for op in &ops {
            let args = &op.operands;
            let num = |i: usize| args.get(i).and_then(Operand::as_f64);
            match op.operator.as_str() {
                "q" => stack.push((ctm, ts.clone())),
                "Q" => {
                    if let Some((m, t)) = stack.pop() {
                        ctm = m;
                        ts = t;
                    }
                }
                "cm" => {
                    if let Some(m) = Matrix::from_operands(args) {
                        ctm = m.then(&ctm);
                    }
                }
                "BT" => {
                    tm = Matrix::IDENTITY;
                    tlm = Matrix::IDENTITY;
                    if let Some(b) = block.take() {
                        self.finish(b);
                    }
                    block = Some(OpenBlock {
                        text: String::new(),
                        x: 0.0,
                        y: 0.0,
                        last: None,
                    });
                }
                "ET" => {
                    if let Some(b) = block.take() {
                        self.finish(b);
                    }
                }
                "Tf" => {
                    if let (Some(Operand::Name(n)), Some(size)) = (args.first(), num(1)) {
                        ts.font = Some(n.clone());
                        ts.size = size;
                    }
                }
                "TL" => ts.leading = num(0).unwrap_or(ts.leading),
                "Tc" => ts.char_spacing = num(0).unwrap_or(ts.char_spacing),
                "Tw" => ts.word_spacing = num(0).unwrap_or(ts.word_spacing),
                "Tz" => ts.h_scale = num(0).map(|v| v / 100.0).unwrap_or(ts.h_scale),
                "Td" | "TD" => {
                    if let (Some(tx), Some(ty)) = (num(0), num(1)) {
                        if op.operator == "TD" {
                            ts.leading = -ty;
                        }
                        tlm = Matrix::translate(tx, ty).then(&tlm);
                        tm = tlm;
                    }
                }
                "Tm" => {
                    if let Some(m) = Matrix::from_operands(args) {
                        tlm = m;
                        tm = m;
                    }
                }
                "T*" => {
                    tlm = Matrix::translate(0.0, -ts.leading).then(&tlm);
                    tm = tlm;
                }
                "Tj" | "'" | "\"" | "TJ" => {
                    if op.operator == "'" || op.operator == "\"" {
                        if op.operator == "\"" {
                            ts.word_spacing = num(0).unwrap_or(ts.word_spacing);
                            ts.char_spacing = num(1).unwrap_or(ts.char_spacing);
                        }
                        tlm = Matrix::translate(0.0, -ts.leading).then(&tlm);
                        tm = tlm;
                    }
                    let items: Vec<Operand> = match op.operator.as_str() {
                        "TJ" => match args.first() {
                            Some(Operand::Array(a)) => a.clone(),
                            _ => continue,
                        },
                        _ => match args.last() {
                            Some(s @ Operand::Str(_)) => vec![s.clone()],
                            _ => continue,
                        },
                    };
                    let Some(b) = block.as_mut() else { continue };
                    let font_name = ts.font.clone().unwrap_or_default();
                    let size = ts.size;
                    let (h_scale, cs, ws) = (ts.h_scale, ts.char_spacing, ts.word_spacing);
                    let doc_fonts = self.font(res, &font_name).is_some();
                    for item in items {
                        match item {
                            Operand::Str(bytes) => {
                                let (text, adv) = match (doc_fonts, self.fonts.get(&font_name)) {
                                    (true, Some(f)) => (f.decode(&bytes), f.advance(&bytes)),
                                    _ => (
                                        bytes.iter().map(|&c| c as char).collect(),
                                        bytes.len() as f64 * 500.0,
                                    ),
                                };
                                let trm = tm.then(&ctm);
                                let (x, y) = trm.apply(0.0, 0.0);
                                let em = (size * trm.scale_y()).abs().max(1e-6);
                                append_run(b, &text, x, y, em);
                                let spaces = bytes.iter().filter(|&&c| c == b' ').count() as f64;
                                let tx = (adv / 1000.0 * size
                                    + cs * bytes.len() as f64
                                    + ws * spaces)
                                    * h_scale;
                                tm = Matrix::translate(tx, 0.0).then(&tm);
                                let (ex, ey) = tm.then(&ctm).apply(0.0, 0.0);
                                b.last = Some((ex, ey, em));
                            }
                            Operand::Number(n) => {
                                let tx = -n / 1000.0 * size * h_scale;
                                tm = Matrix::translate(tx, 0.0).then(&tm);
                                if n < -250.0 && !b.text.ends_with(' ') && !b.text.is_empty() {
                                    b.text.push(' ');
                                }
                            }
                            _ => {}
                        }
                    }
                }
                "Do" => {
                    let Some(Operand::Name(name)) = args.first() else { continue };
                    let Some((id, obj)) = res.lookup(self.doc, b"XObject", name) else {
                        continue;
                    };
                    let Ok(stream) = obj.as_stream() else { continue };
                    match stream.dict.get(b"Subtype").and_then(Object::as_name) {
                        Ok(b"Image") => {
                            if let Some(id) = id {
                                self.out.placements.push(Placement { object: id, ctm });
                            }
                        }
                        Ok(b"Form") if depth < MAX_FORM_DEPTH => {
                            let form_res = Resources::from_dict(self.doc, &stream.dict);
                            let form_res = if form_res.dicts.is_empty() { res.clone() } else { form_res };
                            let m = stream
                                .dict
                                .get(b"Matrix")
                                .ok()
                                .and_then(Matrix::from_object)
                                .unwrap_or(Matrix::IDENTITY);
                            let data = stream
                                .decompressed_content()
                                .unwrap_or_else(|_| stream.content.clone());
                            self.run(&data, &form_res, m.then(&ctm), depth + 1);
                        }
                        _ => {}
                    }
                }
                _ => {}
            }
        }
        if let Some(b) = block.take() {
            self.finish(b);
        }
    }

    fn finish(&mut self, block: OpenBlock) {
        let text = block.text.split_whitespace().collect::<Vec<_>>().join(" ");
        if !text.is_empty() {
            self.out.blocks.push(RawBlock {
                text,
                x: block.x,
                y: block.y,
            });
        }
    }
}

fn append_run(b: &mut OpenBlock, text: &str, x: f64, y: f64, em: f64) {
    if text.is_empty() {
        return;
    }
    match b.last {
        None if b.text.trim().is_empty() => {
            b.x = x;
            b.y = y;
        }
        Some((lx, ly, lem)) => {
            let em = em.max(lem);
            let new_line = (y - ly).abs() > 0.5 * em;
            let gap = x - lx > 0.15 * em;
            if (new_line || gap) && !b.text.ends_with(char::is_whitespace) && !text.starts_with(char::is_whitespace) {
                b.text.push(' ');
            }
        }
        None => {}
    }
    b.text.push_str(text);
}

/// Interprets a page's content streams.
pub(crate) fn interpret_page(doc: &Document, page: ObjectId) -> PageContent {
    let res = Resources::for_page(doc, page);
    let mut interp = Interpreter {
        doc,
        fonts: HashMap::new(),
        out: PageContent::default(),
    };
    for id in doc.get_page_contents(page) {
        let Ok(stream) = doc.get_object(id).and_then(Object::as_stream) else {
            continue;
        };
        match stream.decompressed_content() {
            Ok(data) => interp.run(&data, &res, Matrix::IDENTITY, 0),
            Err(_) if stream.filters().map(|f| f.is_empty()).unwrap_or(true) => {
                interp.run(&stream.content, &res, Matrix::IDENTITY, 0)
            }
            Err(e) => interp.out.errors.push(SyntaxError {
                offset: 0,
                message: format!("content stream {id:?} could not be decompressed: {e}"),
            }),
        }
    }
    interp.out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_strings_arrays_and_numbers() {
        let (ops, err) = parse_operations(b"BT /F1 12 Tf 72 700 Td (Hello \\(x\\)) Tj [(A) -300 <4243>] TJ ET");
        assert!(err.is_none());
        let names: Vec<_> = ops.iter().map(|o| o.operator.as_str()).collect();
        assert_eq!(names, ["BT", "Tf", "Td", "Tj", "TJ", "ET"]);
        assert_eq!(ops[3].operands, vec![Operand::Str(b"Hello (x)".to_vec())]);
        assert_eq!(
            ops[4].operands,
            vec![Operand::Array(vec![
                Operand::Str(b"A".to_vec()),
                Operand::Number(-300.0),
                Operand::Str(b"BC".to_vec())
            ])]
        );
    }

    #[test]
    fn octal_escapes_and_line_continuations() {
        let (ops, _) = parse_operations(b"(a\\101\\\nb) Tj");
        assert_eq!(ops[0].operands, vec![Operand::Str(b"aAb".to_vec())]);
    }

    #[test]
    fn stops_at_syntax_error_with_partial_ops() {
        let (ops, err) = parse_operations(b"BT (ok) Tj ET BT (broken Tj");
        assert_eq!(ops.len(), 4);
        assert!(err.unwrap().message.contains("unterminated"));
    }

    #[test]
    fn inline_images_are_skipped() {
        let (ops, err) =
            parse_operations(b"q BI /W 2 /H 1 /CS /G /BPC 8 ID \x00\xff EI Q BT (t) Tj ET");
        assert!(err.is_none());
        let names: Vec<_> = ops.iter().map(|o| o.operator.as_str()).collect();
        assert_eq!(names, ["q", "Q", "BT", "Tj", "ET"]);
    }

    #[test]
    fn matrix_composition() {
        let scale = Matrix([2.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let shift = Matrix::translate(10.0, 5.0);
        assert_eq!(scale.then(&shift).apply(1.0, 1.0), (12.0, 7.0));
        assert_eq!(shift.then(&scale).apply(1.0, 1.0), (22.0, 12.0));
    }
}
