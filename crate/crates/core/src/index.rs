//! The inverted table.
//!
//! Each database vector is linked to `S` words of the active quantizer and
//! every link stores the vector's binary code computed against that word's
//! reference vector. Posting lists are arrays of packed entries
//! `[u32 LE image id][ceil(L / 8) code bytes]`, sorted by image id.
//!
//! # File layout
//!
//! All integers little-endian.
//!
//! ```text
//! magic            8 bytes  "CNNIDX01"
//! section_count    u32      (3)
//! section table    section_count x { kind: u32, offset: u64, length: u64 }
//! section 1        config
//!                    scheme u8 (0 = TIFC, 1 = IFC), dim u32, indexed_count u64,
//!                    word_count u64, link_count u32, code_length u32
//! section 2        quantizer
//!                    TIFC: virtual_word_seed u64
//!                    IFC:  M u32, K u32, kmeans_iters u32, kmeans_restarts u32,
//!                          kmeans_seed u64, M x K x (D / M) f32 centroids,
//!                          segment by segment
//! section 3        postings
//!                    list_count u64, then per non-empty list in ascending
//!                    word order: word u64, entry_count u32, entries
//! crc32            u32 over every preceding byte
//! ```

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bytes::Reader;
use crate::embed::{self, BinaryCode, EmbedConfig};
use crate::error::{Error, Result};
use crate::pq::{self, PqCodebook, PqConfig, ProductWordId};
use crate::tifc::{self, VirtualWordBank};
use crate::vecio::FeatureSet;

pub const MAGIC: &[u8; 8] = b"CNNIDX01";
const MAGIC_PREFIX: &[u8; 6] = b"CNNIDX";

const SECTION_CONFIG: u32 = 1;
const SECTION_QUANTIZER: u32 = 2;
const SECTION_POSTINGS: u32 = 3;
const SECTION_COUNT: usize = 3;
const HEADER_BYTES: usize = 8 + 4 + SECTION_COUNT * (4 + 8 + 8);
const CONFIG_BYTES: usize = 1 + 4 + 8 + 8 + 4 + 4;
const LIST_HEADER_BYTES: usize = 8 + 4;
const IMAGES_PER_TASK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Tifc,
    Ifc,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Tifc => "tifc",
            Scheme::Ifc => "ifc",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tifc" => Ok(Scheme::Tifc),
            "ifc" => Ok(Scheme::Ifc),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BuildConfig {
    pub scheme: Scheme,
    /// Words each database vector is linked to (`S`).
    pub link_count: usize,
    pub embed: EmbedConfig,
    /// Only used by IFC.
    pub pq: PqConfig,
    /// Only used by TIFC.
    pub virtual_word_seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Ifc,
            link_count: 40,
            embed: EmbedConfig::default(),
            pq: PqConfig::default(),
            virtual_word_seed: 0,
        }
    }
}

/// The word dictionary an index quantizes against.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantizer {
    Tifc(VirtualWordBank),
    Ifc(PqCodebook),
}

impl Quantizer {
    pub fn scheme(&self) -> Scheme {
        match self {
            Quantizer::Tifc(_) => Scheme::Tifc,
            Quantizer::Ifc(_) => Scheme::Ifc,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Quantizer::Tifc(bank) => bank.dim(),
            Quantizer::Ifc(cb) => cb.dim(),
        }
    }

    pub fn word_count(&self) -> u64 {
        match self {
            Quantizer::Tifc(bank) => bank.dim() as u64,
            Quantizer::Ifc(cb) => cb.word_count(),
        }
    }

    /// The `count` best words for `x`, best first: top term-frequency bins
    /// for TIFC, nearest product words for IFC.
    pub fn select_words(&self, x: &[f32], count: usize) -> Result<Vec<u64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        match self {
            Quantizer::Tifc(_) => {
                let tf = tifc::softmax(x)?;
                Ok(tifc::top_words(&tf, count)?.into_iter().map(|(w, _)| w as u64).collect())
            }
            Quantizer::Ifc(cb) => Ok(cb.nearest_words(x, count)?.into_iter().map(|(w, _)| w.0).collect()),
        }
    }

    /// The reference vector binary codes are computed against.
    pub fn word_vector(&self, word: u64) -> Result<Cow<'_, [f32]>> {
        match self {
            Quantizer::Tifc(bank) => {
                if word >= bank.dim() as u64 {
                    return Err(Error::InvalidInput(format!("virtual word {word} out of range")));
                }
                Ok(Cow::Borrowed(bank.word(word as usize)))
            }
            Quantizer::Ifc(cb) => Ok(Cow::Owned(cb.reconstruct(ProductWordId(word))?)),
        }
    }

    fn serialized_bytes(&self) -> usize {
        match self {
            Quantizer::Tifc(_) => 8,
            Quantizer::Ifc(cb) => 4 * 4 + 8 + cb.centroid_bytes(),
        }
    }

    fn memory_bytes(&self) -> usize {
        match self {
            Quantizer::Tifc(bank) => bank.memory_bytes(),
            Quantizer::Ifc(cb) => cb.centroid_bytes(),
        }
    }
}

/// Borrowed view of one posting entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostingEntryRef<'a> {
    pub image_id: u32,
    pub code: &'a [u8],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostingEntry {
    pub image_id: u32,
    pub code: BinaryCode,
}

/// Packed array of `[u32 id][code]` entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PostingList {
    bytes: Vec<u8>,
}

impl PostingList {
    fn push(&mut self, image_id: u32, code: &[u8]) {
        self.bytes.extend_from_slice(&image_id.to_le_bytes());
        self.bytes.extend_from_slice(code);
    }

    pub fn len(&self, code_bytes: usize) -> usize {
        self.bytes.len() / (4 + code_bytes)
    }

    pub fn raw(&self) -> &[u8] {
        &self.bytes
    }

    pub fn entries(&self, code_bytes: usize) -> impl Iterator<Item = PostingEntryRef<'_>> + '_ {
        self.bytes.chunks_exact(4 + code_bytes).map(|e| PostingEntryRef {
            image_id: u32::from_le_bytes(e[..4].try_into().unwrap()),
            code: &e[4..],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Lists {
    /// One slot per virtual word.
    Dense(Vec<PostingList>),
    /// Only occupied product words.
    Sparse(BTreeMap<u64, PostingList>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    quantizer: Quantizer,
    link_count: usize,
    embed: EmbedConfig,
    indexed_count: usize,
    lists: Lists,
}

/// Storage accounting for an index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub scheme: Scheme,
    pub word_count: u64,
    pub occupied_lists: u64,
    pub total_entries: u64,
    pub bytes_per_entry: u64,
    /// Image ids plus codes.
    pub posting_bytes: u64,
    pub code_bytes: u64,
    /// Serialized quantizer section.
    pub quantizer_bytes: u64,
    /// Resident size of the quantizer (TIFC regenerates its word vectors).
    pub quantizer_memory_bytes: u64,
    /// Per-list headers in the file.
    pub list_header_bytes: u64,
    /// Exact size of the file `save` writes.
    pub file_bytes: u64,
    pub list_length_histogram: Vec<HistogramBucket>,
}

/// Number of lists whose length lies in `[min_len, max_len]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBucket {
    pub min_len: u64,
    pub max_len: u64,
    pub lists: u64,
}

impl InvertedIndex {
    /// Builds the quantizer from `db` itself (IFC trains its codebook on the
    /// database) and indexes every vector.
    pub fn build(db: &FeatureSet, cfg: &BuildConfig) -> Result<Self> {
        cfg.embed.validate(db.dim())?;
        let quantizer = match cfg.scheme {
            Scheme::Tifc => Quantizer::Tifc(tifc::make_virtual_words(db.dim(), cfg.virtual_word_seed)?),
            Scheme::Ifc => {
                check_link_count(cfg.link_count, cfg.pq.word_count()?)?;
                Quantizer::Ifc(pq::train(db, &cfg.pq)?)
            }
        };
        Self::build_with_quantizer(db, quantizer, cfg.link_count, cfg.embed)
    }

    /// Indexes `db` against an existing quantizer, e.g. a codebook trained on
    /// a separate training set.
    pub fn build_with_quantizer(
        db: &FeatureSet,
        quantizer: Quantizer,
        link_count: usize,
        embed: EmbedConfig,
    ) -> Result<Self> {
        if db.is_empty() {
            return Err(Error::InvalidInput("cannot index an empty feature set".into()));
        }
        if db.dim() != quantizer.dim() {
            return Err(Error::DimensionMismatch {
                expected: quantizer.dim(),
                found: db.dim(),
            });
        }
        if db.len() > u32::MAX as usize {
            return Err(Error::InvalidInput("too many vectors for 32-bit image ids".into()));
        }
        embed.validate(db.dim())?;
        check_link_count(link_count, quantizer.word_count())?;

        let code_bytes = embed.code_bytes();
        let stride = 8 + code_bytes;
        let dim = db.dim();
        // Per task: for every image, `link_count` records of [u64 word][code].
        let links: Vec<Vec<u8>> = db
            .as_flat()
            .par_chunks(IMAGES_PER_TASK * dim)
            .map(|chunk| -> Result<Vec<u8>> {
                let mut out = Vec::with_capacity(chunk.len() / dim * link_count * stride);
                let mut code = vec![0u8; code_bytes];
                for x in chunk.chunks_exact(dim) {
                    for w in quantizer.select_words(x, link_count)? {
                        let c = quantizer.word_vector(w)?;
                        embed::encode_into(x, &c, embed.code_length, &mut code);
                        out.extend_from_slice(&w.to_le_bytes());
                        out.extend_from_slice(&code);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;

        let records = links.iter().flat_map(|task| task.chunks_exact(stride));
        let lists = match quantizer.scheme() {
            Scheme::Tifc => {
                let mut dense = vec![PostingList::default(); quantizer.word_count() as usize];
                for (i, rec) in records.enumerate() {
                    let word = u64::from_le_bytes(rec[..8].try_into().unwrap());
                    dense[word as usize].push((i / link_count) as u32, &rec[8..]);
                }
                Lists::Dense(dense)
            }
            Scheme::Ifc => {
                let mut sparse: HashMap<u64, PostingList> = HashMap::new();
                for (i, rec) in records.enumerate() {
                    let word = u64::from_le_bytes(rec[..8].try_into().unwrap());
                    sparse.entry(word).or_default().push((i / link_count) as u32, &rec[8..]);
                }
                Lists::Sparse(sparse.into_iter().collect())
            }
        };

        Ok(Self {
            quantizer,
            link_count,
            embed,
            indexed_count: db.len(),
            lists,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.quantizer.scheme()
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn dim(&self) -> usize {
        self.quantizer.dim()
    }

    pub fn word_count(&self) -> u64 {
        self.quantizer.word_count()
    }

    pub fn link_count(&self) -> usize {
        self.link_count
    }

    pub fn embed(&self) -> &EmbedConfig {
        &self.embed
    }

    pub fn code_bytes(&self) -> usize {
        self.embed.code_bytes()
    }

    pub fn indexed_count(&self) -> usize {
        self.indexed_count
    }

    /// Posting list of `word`, if any vector links to it.
    pub fn list(&self, word: u64) -> Option<&PostingList> {
        match &self.lists {
            Lists::Dense(v) => v.get(word as usize).filter(|l| !l.bytes.is_empty()),
            Lists::Sparse(m) => m.get(&word),
        }
    }

    /// Occupied lists in ascending word order.
    pub fn lists(&self) -> Box<dyn Iterator<Item = (u64, &PostingList)> + '_> {
        match &self.lists {
            Lists::Dense(v) => Box::new(
                v.iter()
                    .enumerate()
                    .filter(|(_, l)| !l.bytes.is_empty())
                    .map(|(w, l)| (w as u64, l)),
            ),
            Lists::Sparse(m) => Box::new(m.iter().map(|(&w, l)| (w, l))),
        }
    }

    /// Owned copies of the entries of `word`'s list.
    pub fn posting_entries(&self, word: u64) -> Vec<PostingEntry> {
        let cb = self.code_bytes();
        let bits = self.embed.code_length;
        self.list(word)
            .map(|l| {
                l.entries(cb)
                    .map(|e| PostingEntry {
                        image_id: e.image_id,
                        code: BinaryCode::from_bytes(bits, e.code.to_vec()).expect("stored codes are well formed"),
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn total_entries(&self) -> u64 {
        let cb = self.code_bytes();
        self.lists().map(|(_, l)| l.len(cb) as u64).sum()
    }

    pub fn stats(&self) -> IndexStats {
        let cb = self.code_bytes() as u64;
        let lengths: Vec<u64> = self.lists().map(|(_, l)| l.len(cb as usize) as u64).collect();
        let occupied = lengths.len() as u64;
        let total: u64 = lengths.iter().sum();
        let empty = self.word_count() - occupied;

        let mut histogram = vec![HistogramBucket {
            min_len: 0,
            max_len: 0,
            lists: empty,
        }];
        for &len in &lengths {
            let bucket = (64 - len.leading_zeros()) as usize;
            while histogram.len() <= bucket {
                let b = histogram.len() as u32;
                histogram.push(HistogramBucket {
                    min_len: 1 << (b - 1),
                    max_len: (1 << b) - 1,
                    lists: 0,
                });
            }
            histogram[bucket].lists += 1;
        }

        let quantizer_bytes = self.quantizer.serialized_bytes() as u64;
        let list_header_bytes = occupied * LIST_HEADER_BYTES as u64;
        let posting_bytes = total * (4 + cb);
        let file_bytes = (HEADER_BYTES + CONFIG_BYTES) as u64
            + quantizer_bytes
            + 8
            + list_header_bytes
            + posting_bytes
            + 4;
        IndexStats {
            scheme: self.scheme(),
            word_count: self.word_count(),
            occupied_lists: occupied,
            total_entries: total,
            bytes_per_entry: 4 + cb,
            posting_bytes,
            code_bytes: total * cb,
            quantizer_bytes,
            quantizer_memory_bytes: self.quantizer.memory_bytes() as u64,
            list_header_bytes,
            file_bytes,
            list_length_histogram: histogram,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut config = Vec::with_capacity(CONFIG_BYTES);
        config.push(match self.scheme() {
            Scheme::Tifc => 0u8,
            Scheme::Ifc => 1,
        });
        config.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        config.extend_from_slice(&(self.indexed_count as u64).to_le_bytes());
        config.extend_from_slice(&self.word_count().to_le_bytes());
        config.extend_from_slice(&(self.link_count as u32).to_le_bytes());
        config.extend_from_slice(&(self.embed.code_length as u32).to_le_bytes());

        let mut quant = Vec::with_capacity(self.quantizer.serialized_bytes());
        match &self.quantizer {
            Quantizer::Tifc(bank) => quant.extend_from_slice(&bank.seed().to_le_bytes()),
            Quantizer::Ifc(cb) => cb.write_body(&mut quant),
        }

        let cbytes = self.code_bytes();
        let occupied: Vec<(u64, &PostingList)> = self.lists().collect();
        let posting_len = 8 + occupied.iter().map(|(_, l)| LIST_HEADER_BYTES + l.bytes.len()).sum::<usize>();
        let mut postings = Vec::with_capacity(posting_len);
        postings.extend_from_slice(&(occupied.len() as u64).to_le_bytes());
        for (w, l) in occupied {
            postings.extend_from_slice(&w.to_le_bytes());
            postings.extend_from_slice(&(l.len(cbytes) as u32).to_le_bytes());
            postings.extend_from_slice(&l.bytes);
        }

        let sections = [
            (SECTION_CONFIG, config),
            (SECTION_QUANTIZER, quant),
            (SECTION_POSTINGS, postings),
        ];
        let total = HEADER_BYTES + sections.iter().map(|s| s.1.len()).sum::<usize>() + 4;
        let mut out = Vec::with_capacity(total);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(SECTION_COUNT as u32).to_le_bytes());
        let mut offset = HEADER_BYTES as u64;
        for (kind, body) in &sections {
            out.extend_from_slice(&kind.to_le_bytes());
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            offset += body.len() as u64;
        }
        for (_, body) in &sections {
            out.extend_from_slice(body);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..6] != MAGIC_PREFIX {
            return Err(Error::BadMagic);
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::VersionMismatch {
                expected: String::from_utf8_lossy(&MAGIC[6..]).into_owned(),
                found: String::from_utf8_lossy(&bytes[6..8]).into_owned(),
            });
        }
        if bytes.len() < HEADER_BYTES + 4 {
            return Err(Error::Corrupt("file shorter than its header".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }

        let mut head = Reader::new(&body[8..HEADER_BYTES]);
        let count = head.u32()? as usize;
        if count != SECTION_COUNT {
            return Err(Error::Corrupt(format!("expected {SECTION_COUNT} sections, found {count}")));
        }
        let mut sections: HashMap<u32, &[u8]> = HashMap::new();
        for _ in 0..count {
            let kind = head.u32()?;
            let offset = head.u64()? as usize;
            let len = head.u64()? as usize;
            let end = offset
                .checked_add(len)
                .filter(|&e| e <= body.len() && offset >= HEADER_BYTES)
                .ok_or_else(|| Error::Corrupt(format!("section {kind} out of bounds")))?;
            sections.insert(kind, &body[offset..end]);
        }
        let section = |kind: u32| {
            sections
                .get(&kind)
                .copied()
                .ok_or_else(|| Error::Corrupt(format!("missing section {kind}")))
        };

        let mut cfg = Reader::new(section(SECTION_CONFIG)?);
        let scheme = match cfg.u8()? {
            0 => Scheme::Tifc,
            1 => Scheme::Ifc,
            s => return Err(Error::Corrupt(format!("unknown scheme tag {s}"))),
        };
        let dim = cfg.u32()? as usize;
        let indexed_count = cfg.u64()? as usize;
        let word_count = cfg.u64()?;
        let link_count = cfg.u32()? as usize;
        let embed = EmbedConfig {
            code_length: cfg.u32()? as usize,
        };
        embed.validate(dim).map_err(|e| Error::Corrupt(e.to_string()))?;

        let mut q = Reader::new(section(SECTION_QUANTIZER)?);
        let quantizer = match scheme {
            Scheme::Tifc => Quantizer::Tifc(tifc::make_virtual_words(dim, q.u64()?)?),
            Scheme::Ifc => Quantizer::Ifc(PqCodebook::read_body(&mut q, dim)?),
        };
        if quantizer.word_count() != word_count {
            return Err(Error::Corrupt(format!(
                "word count {word_count} disagrees with quantizer ({})",
                quantizer.word_count()
            )));
        }

        let code_bytes = embed.code_bytes();
        let stride = 4 + code_bytes;
        let mut p = Reader::new(section(SECTION_POSTINGS)?);
        let list_count = p.u64()?;
        let mut sparse = BTreeMap::new();
        for _ in 0..list_count {
            let word = p.u64()?;
            if word >= word_count {
                return Err(Error::Corrupt(format!("posting list for word {word} out of range")));
            }
            let n = p.u32()? as usize;
            let raw = p.take(n * stride)?;
            for e in raw.chunks_exact(stride) {
                if u32::from_le_bytes(e[..4].try_into().unwrap()) as usize >= indexed_count {
                    return Err(Error::Corrupt(format!("image id out of range in list {word}")));
                }
            }
            sparse.insert(word, PostingList { bytes: raw.to_vec() });
        }
        let lists = match scheme {
            Scheme::Tifc => {
                let mut dense = vec![PostingList::default(); word_count as usize];
                for (w, l) in sparse {
                    dense[w as usize] = l;
                }
                Lists::Dense(dense)
            }
            Scheme::Ifc => Lists::Sparse(sparse),
        };

        Ok(Self {
            quantizer,
            link_count,
            embed,
            indexed_count,
            lists,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn check_link_count(link_count: usize, word_count: u64) -> Result<()> {
    if link_count == 0 || link_count as u64 > word_count {
        return Err(Error::InvalidConfig(format!(
            "link count S = {link_count} outside 1..={word_count}"
        )));
    }
    Ok(())
}
