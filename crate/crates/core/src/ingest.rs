//! OpenKE benchmark directory parsing.
//!
//! Layout: `entity2id.txt` and `relation2id.txt` start with an entry count and
//! hold `<name> <id>` rows; `train2id.txt`, `valid2id.txt` and `test2id.txt`
//! start with a triple count and hold `<head> <tail> <relation>` rows. Any run
//! of spaces or tabs separates columns.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, NodeId, RelationId, Triple};

pub const ENTITY_MAP: &str = "entity2id.txt";
pub const RELATION_MAP: &str = "relation2id.txt";
pub const TRIPLE_FILES: [&str; 3] = ["train2id.txt", "valid2id.txt", "test2id.txt"];
/// Optional `<name>\t<text>` files with longer entity/relation verbalizations.
pub const ENTITY_TEXT: &str = "entity2text.txt";
pub const RELATION_TEXT: &str = "relation2text.txt";

/// Non-blank lines with their 1-based line numbers.
fn content_lines<'a, R: BufRead + 'a>(
    reader: R,
    source: &'a str,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(Error::format(source, i + 1, e.to_string()))),
        })
}

fn parse_header(line: Option<Result<(usize, String)>>, source: &str) -> Result<(usize, usize)> {
    let (no, text) = line.ok_or_else(|| Error::format(source, 1, "empty file, expected a count header"))??;
    let count = text
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::format(source, no, format!("expected an entry count, found {:?}", text.trim())))?;
    Ok((no, count))
}

/// Parses an OpenKE id map. Ids must be a permutation of `0..count`.
pub fn parse_id_map<R: BufRead>(reader: R, source: &str) -> Result<BTreeMap<String, u32>> {
    let mut lines = content_lines(reader, source);
    let (mut last_line, declared) = parse_header(lines.next(), source)?;
    let mut map = BTreeMap::new();
    let mut seen = vec![false; declared];
    for line in lines {
        let (no, text) = line?;
        last_line = no;
        if map.len() == declared {
            return Err(Error::format(
                source,
                no,
                format!("more entries than the declared count {declared}"),
            ));
        }
        let trimmed = text.trim();
        let split = trimmed
            .rfind([' ', '\t'])
            .ok_or_else(|| Error::format(source, no, "expected `<name> <id>`"))?;
        let name = trimmed[..split].trim();
        let id_text = &trimmed[split + 1..];
        let id: u32 = id_text
            .parse()
            .map_err(|_| Error::format(source, no, format!("invalid id {id_text:?}")))?;
        if id as usize >= declared {
            return Err(Error::format(
                source,
                no,
                format!("id {id} out of range for declared count {declared}"),
            ));
        }
        if std::mem::replace(&mut seen[id as usize], true) {
            return Err(Error::format(source, no, format!("duplicate id {id}")));
        }
        if map.insert(name.to_string(), id).is_some() {
            return Err(Error::format(source, no, format!("duplicate name {name:?}")));
        }
    }
    if map.len() != declared {
        return Err(Error::format(
            source,
            last_line,
            format!("declared {declared} entries but found {}", map.len()),
        ));
    }
    Ok(map)
}

/// Parses an OpenKE triple file (`head tail relation` columns) into
/// (head, relation, tail) order.
pub fn parse_triples_file<R: BufRead>(reader: R, source: &str) -> Result<Vec<Triple>> {
    let mut lines = content_lines(reader, source);
    let (mut last_line, declared) = parse_header(lines.next(), source)?;
    let mut triples = Vec::with_capacity(declared);
    for line in lines {
        let (no, text) = line?;
        last_line = no;
        if triples.len() == declared {
            return Err(Error::format(
                source,
                no,
                format!("more triples than the declared count {declared}"),
            ));
        }
        let mut cols = [0u32; 3];
        let mut tokens = text.split_whitespace();
        for (slot, col) in cols.iter_mut().zip(["head", "tail", "relation"]) {
            let token = tokens
                .next()
                .ok_or_else(|| Error::format(source, no, format!("short line, missing {col}")))?;
            *slot = token
                .parse()
                .map_err(|_| Error::format(source, no, format!("non-integer {col} {token:?}")))?;
        }
        if let Some(extra) = tokens.next() {
            return Err(Error::format(source, no, format!("unexpected extra column {extra:?}")));
        }
        let [head, tail, relation] = cols;
        triples.push(Triple::new(head, relation, tail));
    }
    if triples.len() != declared {
        return Err(Error::format(
            source,
            last_line,
            format!("declared {declared} triples but found {}", triples.len()),
        ));
    }
    Ok(triples)
}

/// Writes triples in OpenKE layout (`head tail relation`).
pub fn write_triples_file<W: Write>(mut writer: W, triples: &[Triple]) -> std::io::Result<()> {
    writeln!(writer, "{}", triples.len())?;
    for t in triples {
        writeln!(writer, "{} {} {}", t.head, t.tail, t.relation)?;
    }
    Ok(())
}

/// Parses a `<key>\t<text>` verbalization file. Later duplicates win.
pub fn parse_text_map<R: BufRead>(reader: R, source: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for line in content_lines(reader, source) {
        let (no, text) = line?;
        let (key, value) = text
            .split_once('\t')
            .ok_or_else(|| Error::format(source, no, "expected `<key>\\t<text>`"))?;
        let value = value.trim();
        if !value.is_empty() {
            map.insert(key.trim().to_string(), value.to_string());
        }
    }
    Ok(map)
}

/// Surface names used when rendering prompts.
///
/// `*_names` are short labels ("Miles Davis", "music_artist_genre"); the
/// optional `*_phrases` are the verbalizations used inside reasoning clauses
/// ("Miles Davis music artist", "is associated with genre") and fall back to
/// the label when absent. A map whose `*_complete` flag is false is never
/// consulted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub entity_count: usize,
    pub relation_count: usize,
    pub entity_names: BTreeMap<u32, String>,
    pub entity_phrases: BTreeMap<u32, String>,
    pub relation_names: BTreeMap<u32, String>,
    pub relation_phrases: BTreeMap<u32, String>,
    pub entities_complete: bool,
    pub relations_complete: bool,
}

impl Lexicon {
    /// An empty lexicon: every id renders as its `Node_`/`relation_` token.
    pub fn empty(entity_count: usize, relation_count: usize) -> Self {
        Lexicon {
            entity_count,
            relation_count,
            ..Default::default()
        }
    }

    pub fn with_entity(mut self, id: u32, name: &str, phrase: Option<&str>) -> Self {
        self.entities_complete = true;
        self.entity_names.insert(id, name.trim().to_string());
        if let Some(p) = phrase {
            self.entity_phrases.insert(id, p.trim().to_string());
        }
        self
    }

    pub fn with_relation(mut self, id: u32, name: &str, phrase: Option<&str>) -> Self {
        self.relations_complete = true;
        self.relation_names.insert(id, name.trim().to_string());
        if let Some(p) = phrase {
            self.relation_phrases.insert(id, p.trim().to_string());
        }
        self
    }

    pub fn entity_name(&self, id: NodeId) -> Option<&str> {
        self.entities_complete
            .then(|| self.entity_names.get(&id.0).map(String::as_str))
            .flatten()
    }

    pub fn entity_phrase(&self, id: NodeId) -> Option<&str> {
        if !self.entities_complete {
            return None;
        }
        self.entity_phrases
            .get(&id.0)
            .or_else(|| self.entity_names.get(&id.0))
            .map(String::as_str)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relations_complete
            .then(|| self.relation_names.get(&id.0).map(String::as_str))
            .flatten()
    }

    pub fn relation_phrase(&self, id: RelationId) -> Option<&str> {
        if !self.relations_complete {
            return None;
        }
        self.relation_phrases
            .get(&id.0)
            .or_else(|| self.relation_names.get(&id.0))
            .map(String::as_str)
    }

    /// Relation whose label or phrase equals `text`, ignoring ASCII case.
    pub fn relation_by_name(&self, text: &str) -> Option<RelationId> {
        if !self.relations_complete {
            return None;
        }
        let text = text.trim();
        self.relation_names
            .iter()
            .chain(self.relation_phrases.iter())
            .find(|(_, name)| name.eq_ignore_ascii_case(text))
            .map(|(&id, _)| RelationId(id))
    }
}

/// Heuristic: machine identifiers (numeric synset offsets, Freebase mids,
/// Wikidata Q-ids) are not useful surface names.
fn looks_opaque(name: &str) -> bool {
    let n = name.trim();
    if n.is_empty() || n.chars().all(|c| c.is_ascii_digit()) {
        return true;
    }
    if let Some(rest) = n.strip_prefix("/m/").or_else(|| n.strip_prefix("/g/")) {
        return rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    }
    if let Some(rest) = n.strip_prefix('Q') {
        return !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit());
    }
    false
}

/// True when at least 90% of the names are human-readable.
pub fn names_readable<'a>(names: impl IntoIterator<Item = &'a str>) -> bool {
    let (mut total, mut opaque) = (0usize, 0usize);
    for n in names {
        total += 1;
        opaque += looks_opaque(n) as usize;
    }
    total > 0 && opaque * 10 <= total
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    /// Merge train/valid/test triple files into one graph.
    pub merge_splits: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { merge_splits: true }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub dir: PathBuf,
    /// File name → present.
    pub files: BTreeMap<String, bool>,
    /// Triple file name → declared (header) count, for the files that were loaded.
    pub declared_triples: BTreeMap<String, usize>,
    pub entities: usize,
    pub relations: usize,
    /// Unique triples in the loaded graph.
    pub triples: usize,
    pub duplicates_collapsed: usize,
    pub merged_splits: bool,
    pub entity_names_readable: bool,
    pub relation_names_readable: bool,
}

pub struct LoadedDataset {
    pub graph: KnowledgeGraph,
    pub lexicon: Lexicon,
    pub manifest: DatasetManifest,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn names_by_id(map: &BTreeMap<String, u32>) -> BTreeMap<u32, String> {
    map.iter().map(|(name, &id)| (id, name.clone())).collect()
}

/// Loads an OpenKE benchmark directory.
pub fn load_dataset(dir: &Path, options: &LoadOptions) -> Result<LoadedDataset> {
    let mut files = BTreeMap::new();
    for f in [ENTITY_MAP, RELATION_MAP]
        .into_iter()
        .chain(TRIPLE_FILES)
        .chain([ENTITY_TEXT, RELATION_TEXT])
    {
        files.insert(f.to_string(), dir.join(f).is_file());
    }
    let triple_files: Vec<&str> = if options.merge_splits {
        TRIPLE_FILES.into_iter().filter(|f| files[*f]).collect()
    } else {
        vec![TRIPLE_FILES[0]]
    };
    let mut missing: Vec<String> = [ENTITY_MAP, RELATION_MAP]
        .into_iter()
        .filter(|f| !files[*f])
        .map(String::from)
        .collect();
    if triple_files.is_empty() {
        missing.push(format!("one of {}", TRIPLE_FILES.join("/")));
    } else if !options.merge_splits && !files[TRIPLE_FILES[0]] {
        missing.push(TRIPLE_FILES[0].to_string());
    }
    if !missing.is_empty() {
        return Err(Error::MissingFiles {
            dir: dir.to_path_buf(),
            missing,
        });
    }

    let entity_map = parse_id_map(open(&dir.join(ENTITY_MAP))?, ENTITY_MAP)?;
    let relation_map = parse_id_map(open(&dir.join(RELATION_MAP))?, RELATION_MAP)?;

    let parsed: Vec<(String, Vec<Triple>)> = std::thread::scope(|s| {
        let handles: Vec<_> = triple_files
            .iter()
            .map(|&f| {
                let path = dir.join(f);
                s.spawn(move || -> Result<_> { Ok((f.to_string(), parse_triples_file(open(&path)?, f)?)) })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("triple parser panicked"))
            .collect::<Result<_>>()
    })?;

    let declared_triples = parsed.iter().map(|(f, ts)| (f.clone(), ts.len())).collect();
    let graph = KnowledgeGraph::build(
        entity_map.len(),
        relation_map.len(),
        parsed.into_iter().flat_map(|(_, ts)| ts),
    )?;

    let entities_readable = names_readable(entity_map.keys().map(String::as_str));
    let relations_readable = names_readable(relation_map.keys().map(String::as_str));
    let mut lexicon = Lexicon {
        entity_count: graph.entity_count(),
        relation_count: graph.relation_count(),
        entity_names: if entities_readable { names_by_id(&entity_map) } else { BTreeMap::new() },
        relation_names: if relations_readable { names_by_id(&relation_map) } else { BTreeMap::new() },
        entities_complete: entities_readable,
        relations_complete: relations_readable,
        ..Default::default()
    };
    if files[ENTITY_TEXT] {
        let text = parse_text_map(open(&dir.join(ENTITY_TEXT))?, ENTITY_TEXT)?;
        lexicon.entity_phrases = entity_map
            .iter()
            .filter_map(|(k, &id)| text.get(k).map(|v| (id, v.clone())))
            .collect();
        lexicon.entities_complete |= !lexicon.entity_phrases.is_empty();
    }
    if files[RELATION_TEXT] {
        let text = parse_text_map(open(&dir.join(RELATION_TEXT))?, RELATION_TEXT)?;
        lexicon.relation_phrases = relation_map
            .iter()
            .filter_map(|(k, &id)| text.get(k).map(|v| (id, v.clone())))
            .collect();
        lexicon.relations_complete |= !lexicon.relation_phrases.is_empty();
    }

    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let manifest = DatasetManifest {
        name,
        dir: dir.to_path_buf(),
        files,
        declared_triples,
        entities: graph.entity_count(),
        relations: graph.relation_count(),
        triples: graph.triple_count(),
        duplicates_collapsed: graph.duplicates_collapsed(),
        merged_splits: options.merge_splits,
        entity_names_readable: entities_readable,
        relation_names_readable: relations_readable,
    };
    Ok(LoadedDataset {
        graph,
        lexicon,
        manifest,
    })
}

/// Published entity/relation/triple counts for the four benchmark graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceStats {
    pub name: &'static str,
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
}

pub const REFERENCE_STATS: [ReferenceStats; 4] = [
    ReferenceStats { name: "WN18RR", entities: 40_943, relations: 11, triples: 86_835 },
    ReferenceStats { name: "NELL-995", entities: 75_492, relations: 200, triples: 149_678 },
    ReferenceStats { name: "FB15k-237", entities: 14_541, relations: 237, triples: 310_116 },
    ReferenceStats { name: "YAGO3-10", entities: 123_182, relations: 37, triples: 1_179_040 },
];

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Reference statistics for a dataset directory name such as `WN18RR` or `FB15K237`.
pub fn reference_stats(name: &str) -> Option<ReferenceStats> {
    let key = normalize_name(name);
    REFERENCE_STATS
        .into_iter()
        .find(|s| normalize_name(s.name) == key)
}

/// Differences between the manifest and the reference counts, empty when they agree.
pub fn compare_with_reference(manifest: &DatasetManifest, reference: &ReferenceStats) -> Vec<String> {
    let mut diffs = Vec::new();
    for (what, got, want) in [
        ("entities", manifest.entities, reference.entities),
        ("relations", manifest.relations, reference.relations),
        ("triples", manifest.triples, reference.triples),
    ] {
        if got != want {
            diffs.push(format!("{}: {what} {got} != {want}", reference.name));
        }
    }
    diffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn id_map_examples() {
        let m = parse_id_map("2\napple\t0\nbanana\t1".as_bytes(), "t").unwrap();
        assert_eq!(m["apple"], 0);
        assert_eq!(m["banana"], 1);
        let err = parse_id_map("1\napple\t0\nbanana\t1".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, Error::Format { line: 3, .. }), "{err}");
    }

    #[test]
    fn id_map_errors() {
        assert!(parse_id_map("3\na 0\nb 1".as_bytes(), "t").is_err());
        assert!(parse_id_map("2\na 0\nb 0".as_bytes(), "t").is_err());
        assert!(parse_id_map("2\na 0\na 1".as_bytes(), "t").is_err());
        assert!(parse_id_map("2\na 0\nb 2".as_bytes(), "t").is_err());
        assert!(parse_id_map("x\na 0".as_bytes(), "t").is_err());
        assert!(parse_id_map("".as_bytes(), "t").is_err());
    }

    #[test]
    fn id_map_whitespace_and_spaced_names() {
        let m = parse_id_map("2\nMiles Davis   0\n  Bebop\t\t1 \n\n\n".as_bytes(), "t").unwrap();
        assert_eq!(m["Miles Davis"], 0);
        assert_eq!(m["Bebop"], 1);
    }

    #[test]
    fn triples_examples() {
        assert_eq!(
            parse_triples_file("1\n0 1 0".as_bytes(), "t").unwrap(),
            vec![Triple::new(0, 0, 1)]
        );
        assert_eq!(parse_triples_file("2\n0 1 0\n1 2 0\n".as_bytes(), "t").unwrap().len(), 2);
    }

    #[test]
    fn triples_errors_carry_line_numbers() {
        let e = parse_triples_file("2\n0 1 0\n1 x 0".as_bytes(), "t").unwrap_err();
        assert!(matches!(e, Error::Format { line: 3, .. }), "{e}");
        let e = parse_triples_file("1\n0 1".as_bytes(), "t").unwrap_err();
        assert!(matches!(e, Error::Format { line: 2, .. }), "{e}");
        assert!(parse_triples_file("3\n0 1 0".as_bytes(), "t").is_err());
        assert!(parse_triples_file("1\n0 1 0\n1 1 0".as_bytes(), "t").is_err());
        assert!(parse_triples_file("1\n0 1 0 4".as_bytes(), "t").is_err());
    }

    #[test]
    fn readability_heuristic() {
        assert!(!names_readable(["00260881", "01332730"]));
        assert!(!names_readable(["/m/027rn", "/m/06cx9"]));
        assert!(!names_readable(["Q42", "Q1"]));
        assert!(names_readable(["_hypernym", "_member_meronym"]));
        assert!(names_readable(["concept_person_miles_davis", "Chatou"]));
        assert!(!names_readable(std::iter::empty()));
    }

    #[test]
    fn lexicon_fallbacks() {
        let lex = Lexicon::empty(3, 2)
            .with_entity(0, "Miles Davis", Some("Miles Davis music artist"))
            .with_relation(1, "music_artist_genre", Some("is associated with genre"));
        assert_eq!(lex.entity_name(NodeId(0)), Some("Miles Davis"));
        assert_eq!(lex.entity_phrase(NodeId(0)), Some("Miles Davis music artist"));
        assert_eq!(lex.entity_phrase(NodeId(1)), None);
        assert_eq!(lex.relation_by_name("MUSIC_ARTIST_GENRE"), Some(RelationId(1)));
        assert_eq!(lex.relation_by_name("is associated with genre"), Some(RelationId(1)));
        let mut off = lex.clone();
        off.entities_complete = false;
        assert_eq!(off.entity_name(NodeId(0)), None);
    }

    #[test]
    fn reference_lookup() {
        assert_eq!(reference_stats("WN18RR").unwrap().entities, 40_943);
        assert_eq!(reference_stats("fb15k237").unwrap().relations, 237);
        assert_eq!(reference_stats("NELL995").unwrap().triples, 149_678);
        assert_eq!(reference_stats("yago3-10").unwrap().triples, 1_179_040);
        assert!(reference_stats("FB15K").is_none());
    }

    proptest! {
        #[test]
        fn triples_file_round_trip(ts in prop::collection::vec((0u32..50, 0u32..5, 0u32..50), 0..60)) {
            let triples: Vec<Triple> = ts.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect();
            let mut buf = Vec::new();
            write_triples_file(&mut buf, &triples).unwrap();
            let back = parse_triples_file(buf.as_slice(), "rt").unwrap();
            prop_assert_eq!(back, triples);
        }
    }
}
