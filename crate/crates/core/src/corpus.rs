//! Parallel corpora, gold edit sets, and their on-disk formats.
//!
//! Parallel files hold one sample per line as `source \t target`, each side
//! pre-tokenized and single-space separated. Gold edits use the sentence /
//! annotation block layout of the M² scorer.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub type Token = String;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelSample {
    pub id: usize,
    pub source: Vec<Token>,
    pub target: Vec<Token>,
}

impl ParallelSample {
    pub fn new(id: usize, source: Vec<Token>, target: Vec<Token>) -> Self {
        debug_assert!(!source.is_empty());
        ParallelSample { id, source, target }
    }

    pub fn from_strs(id: usize, source: &str, target: &str) -> Self {
        let split = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
        ParallelSample::new(id, split(source), split(target))
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub samples: Vec<ParallelSample>,
}

impl Corpus {
    /// Builds a corpus from `(source, target)` pairs, assigning ids in order.
    pub fn from_pairs(name: impl Into<String>, pairs: Vec<(Vec<Token>, Vec<Token>)>) -> Self {
        let samples = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (s, t))| ParallelSample::new(id, s, t))
            .collect();
        Corpus {
            name: name.into(),
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Serializes back to the parallel TSV layout.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&s.source.join(" "));
            out.push('\t');
            out.push_str(&s.target.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

fn tokens(side: &str, context: &str, line: usize, what: &str) -> Result<Vec<Token>> {
    if side.is_empty() {
        return Ok(Vec::new());
    }
    side.split(' ')
        .map(|tok| {
            if tok.is_empty() {
                Err(Error::parse(context, line, format!("empty token in {what}")))
            } else if tok.chars().any(char::is_whitespace) {
                Err(Error::parse(context, line, format!("token {tok:?} in {what} contains whitespace")))
            } else {
                Ok(tok.to_owned())
            }
        })
        .collect()
}

/// Parses parallel TSV text. `name` is used both as the corpus name and in
/// error messages.
pub fn parse_parallel(text: &str, name: &str) -> Result<Corpus> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            return Err(Error::parse(name, lineno, "blank line"));
        }
        let mut parts = line.split('\t');
        let (src, tgt) = match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(t), None) => (s, t),
            _ => return Err(Error::parse(name, lineno, "expected exactly one tab")),
        };
        let source = tokens(src, name, lineno, "source")?;
        if source.is_empty() {
            return Err(Error::parse(name, lineno, "empty source"));
        }
        let target = tokens(tgt, name, lineno, "target")?;
        samples.push(ParallelSample::new(samples.len(), source, target));
    }
    Ok(Corpus {
        name: name.to_owned(),
        samples,
    })
}

pub fn load_parallel(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_parallel(&text, &path.display().to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoldEdit {
    pub start: usize,
    pub end: usize,
    pub replacement: Vec<Token>,
}

impl GoldEdit {
    pub fn new(start: usize, end: usize, replacement: &[&str]) -> Self {
        GoldEdit {
            start,
            end,
            replacement: replacement.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Gold edits for one sentence, grouped by annotator id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldEditSet {
    pub source: Vec<Token>,
    pub annotators: BTreeMap<u32, Vec<GoldEdit>>,
}

impl GoldEditSet {
    pub fn single(source: Vec<Token>, edits: Vec<GoldEdit>) -> Self {
        let mut annotators = BTreeMap::new();
        annotators.insert(0, edits);
        GoldEditSet { source, annotators }
    }
}

const NONE: &str = "-NONE-";

fn parse_edit_line(
    body: &str,
    m: usize,
    context: &str,
    lineno: usize,
) -> Result<(u32, Option<GoldEdit>)> {
    let fields: Vec<&str> = body.split("|||").collect();
    if fields.len() != 6 {
        return Err(Error::parse(
            context,
            lineno,
            format!("expected 6 '|||'-separated fields, found {}", fields.len()),
        ));
    }
    let annotator: u32 = fields[5]
        .trim()
        .parse()
        .map_err(|_| Error::parse(context, lineno, format!("bad annotator id {:?}", fields[5])))?;
    let mut span = fields[0].split(' ');
    let (start, end) = match (span.next(), span.next(), span.next()) {
        (Some(a), Some(b), None) => (a, b),
        _ => return Err(Error::parse(context, lineno, "expected '<start> <end>'")),
    };
    let start: i64 = start
        .parse()
        .map_err(|_| Error::parse(context, lineno, format!("bad start offset {start:?}")))?;
    let end: i64 = end
        .parse()
        .map_err(|_| Error::parse(context, lineno, format!("bad end offset {end:?}")))?;
    let kind = fields[1];
    if kind.eq_ignore_ascii_case("noop") || (start == -1 && end == -1) {
        return Ok((annotator, None));
    }
    if start < 0 || end < start || end as usize > m {
        return Err(Error::parse(
            context,
            lineno,
            format!("span {start}..{end} outside sentence of {m} tokens"),
        ));
    }
    let corr = fields[2];
    let replacement = if corr.is_empty() || corr == NONE {
        Vec::new()
    } else {
        tokens(corr, context, lineno, "correction")?
    };
    Ok((
        annotator,
        Some(GoldEdit {
            start: start as usize,
            end: end as usize,
            replacement,
        }),
    ))
}

pub fn parse_m2(text: &str, context: &str) -> Result<Vec<GoldEditSet>> {
    let mut out = Vec::new();
    let mut current: Option<(GoldEditSet, usize)> = None;

    let finish = |set: GoldEditSet, header_line: usize, out: &mut Vec<GoldEditSet>| -> Result<()> {
        let mut set = set;
        for edits in set.annotators.values_mut() {
            edits.sort();
            if let Some(w) = edits.windows(2).find(|w| w[1].start < w[0].end) {
                return Err(Error::parse(
                    context,
                    header_line,
                    format!(
                        "overlapping edits {}..{} and {}..{} from one annotator",
                        w[0].start, w[0].end, w[1].start, w[1].end
                    ),
                ));
            }
        }
        out.push(set);
        Ok(())
    };

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            if let Some((set, at)) = current.take() {
                finish(set, at, &mut out)?;
            }
        } else if let Some(rest) = line.strip_prefix("S ") {
            if current.is_some() {
                return Err(Error::parse(context, lineno, "sentence line without preceding blank line"));
            }
            let source = tokens(rest, context, lineno, "sentence")?;
            current = Some((
                GoldEditSet {
                    source,
                    annotators: BTreeMap::new(),
                },
                lineno,
            ));
        } else if let Some(rest) = line.strip_prefix("A ") {
            let Some((set, _)) = current.as_mut() else {
                return Err(Error::parse(context, lineno, "edit line before any sentence line"));
            };
            let (annotator, edit) = parse_edit_line(rest, set.source.len(), context, lineno)?;
            let edits = set.annotators.entry(annotator).or_default();
            if let Some(e) = edit {
                edits.push(e);
            }
        } else {
            return Err(Error::parse(context, lineno, "expected a line starting with 'S ' or 'A '"));
        }
    }
    if let Some((set, at)) = current.take() {
        finish(set, at, &mut out)?;
    }
    Ok(out)
}

pub fn load_m2(path: impl AsRef<Path>) -> Result<Vec<GoldEditSet>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_m2(&text, &path.display().to_string())
}

/// Renders gold sets in M² layout. Edit types are written as `X`; annotators
/// with no edits get a `noop` line.
pub fn to_m2(sets: &[GoldEditSet]) -> String {
    let mut out = String::new();
    for set in sets {
        out.push_str("S ");
        out.push_str(&set.source.join(" "));
        out.push('\n');
        for (annotator, edits) in &set.annotators {
            if edits.is_empty() {
                out.push_str(&format!("A -1 -1|||noop|||{NONE}|||REQUIRED|||{NONE}|||{annotator}\n"));
            }
            for e in edits {
                out.push_str(&format!(
                    "A {} {}|||X|||{}|||REQUIRED|||{NONE}|||{annotator}\n",
                    e.start,
                    e.end,
                    e.replacement.join(" ")
                ));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_article_insertion_example() {
        let c = parse_parallel("do you have best friend ?\tDo you have a best friend ?\n", "t").unwrap();
        assert_eq!(c.samples[0].source.len(), 6);
        assert_eq!(c.samples[0].target.len(), 7);
    }

    #[test]
    fn identity_and_empty_target() {
        let c = parse_parallel("a\ta\nx y\t\n", "t").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.samples[0].is_identity());
        assert_eq!(c.samples[1].source, vec!["x", "y"]);
        assert!(c.samples[1].target.is_empty());
        assert_eq!(c.samples[1].id, 1);
    }

    #[test]
    fn malformed_lines_name_their_line_number() {
        for (text, line) in [
            ("a\ta\n\nb\tb\n", 2),
            ("a\ta\nno tab here\n", 2),
            ("a\tb\tc\n", 1),
            ("\tb\n", 1),
            ("a  b\ta\n", 1),
        ] {
            match parse_parallel(text, "t") {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn m2_minimal_record() {
        let sets = parse_m2("S a b\nA 1 2|||R:X|||c|||REQUIRED|||-NONE-|||0\n", "t").unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].annotators[&0], vec![GoldEdit::new(1, 2, &["c"])]);
    }

    #[test]
    fn m2_noop_yields_empty_list() {
        let sets = parse_m2("S a b\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n", "t").unwrap();
        assert_eq!(sets[0].annotators.len(), 1);
        assert!(sets[0].annotators[&0].is_empty());
    }

    #[test]
    fn m2_two_annotators() {
        // Read by hand: sentence 1 has annotator 0 replacing "goes"->"go" style
        // edits at 1..2 and inserting "to" at 2..2; annotator 1 deletes token 0.
        // Sentence 2 has a single noop annotator.
        let text = "\
S he go school
A 2 2|||M:PREP|||to|||REQUIRED|||-NONE-|||0
A 1 2|||R:VERB|||goes|||REQUIRED|||-NONE-|||0
A 0 1|||U:PRON||||||REQUIRED|||-NONE-|||1

S fine .
A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0
";
        let sets = parse_m2(text, "t").unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].annotators.len(), 2);
        assert_eq!(
            sets[0].annotators[&0],
            vec![GoldEdit::new(1, 2, &["goes"]), GoldEdit::new(2, 2, &["to"])]
        );
        assert_eq!(sets[0].annotators[&1], vec![GoldEdit::new(0, 1, &[])]);
        assert!(sets[1].annotators[&0].is_empty());
        // Render and re-read.
        assert_eq!(parse_m2(&to_m2(&sets), "t").unwrap(), sets);
    }

    #[test]
    fn m2_errors() {
        let bad = [
            ("A 0 1|||X|||a|||REQUIRED|||-NONE-|||0\n", 1),
            ("S a\nA 0 2|||X|||a|||REQUIRED|||-NONE-|||0\n", 2),
            ("S a\nA 0 1|||X|||a|||REQUIRED|||0\n", 2),
            ("S a\nA x 1|||X|||a|||REQUIRED|||-NONE-|||0\n", 2),
            ("S a\nB\n", 2),
        ];
        for (text, line) in bad {
            match parse_m2(text, "t") {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    fn token() -> impl Strategy<Value = String> {
        "[a-zA-Z.,?'é]{1,6}"
    }

    fn line() -> impl Strategy<Value = (Vec<String>, Vec<String>)> {
        (prop::collection::vec(token(), 1..8), prop::collection::vec(token(), 0..8))
    }

    proptest! {
        #[test]
        fn tsv_round_trips_byte_for_byte(lines in prop::collection::vec(line(), 1..12)) {
            let text: String = lines
                .iter()
                .map(|(s, t)| format!("{}\t{}\n", s.join(" "), t.join(" ")))
                .collect();
            let corpus = parse_parallel(&text, "p").unwrap();
            prop_assert_eq!(corpus.to_tsv(), text);
            for (i, s) in corpus.samples.iter().enumerate() {
                prop_assert_eq!(s.id, i);
                prop_assert!(!s.source.is_empty());
                prop_assert!(s.source.iter().chain(&s.target).all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
            }
        }
    }
}
