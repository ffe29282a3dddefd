use serde::Serialize;

use super::union_find::UnionFind;
use super::RatioError;
use crate::model::{Corpus, ModelError, Statistic};

/// Disjoint blocks covering `0..len` of some labelled corpus. Blocks are
/// kept sorted internally and ordered by their smallest member, so two
/// partitions compare equal exactly when they group the same indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
    pub corpus_label: String,
}

impl Partition {
    pub fn from_blocks(
        mut blocks: Vec<Vec<usize>>,
        corpus_label: impl Into<String>,
        len: usize,
    ) -> Result<Partition, RatioError> {
        let mut seen = vec![false; len];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(RatioError::InvalidPartition("empty block".into()));
            }
            b.sort_unstable();
            for &i in b.iter() {
                if i >= len || seen[i] {
                    return Err(RatioError::InvalidPartition(format!(
                        "index {i} is out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(RatioError::InvalidPartition(format!(
                "index {missing} is not covered"
            )));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Partition {
            blocks,
            corpus_label: corpus_label.into(),
        })
    }

    pub(crate) fn from_union_find(
        uf: &mut UnionFind,
        corpus_label: impl Into<String>,
    ) -> Partition {
        Partition {
            blocks: uf.groups(),
            corpus_label: corpus_label.into(),
        }
    }

    /// Groups indices by a key; equal keys share a block.
    pub fn from_keys<K: PartialEq>(keys: &[K], corpus_label: impl Into<String>) -> Partition {
        let mut uf = UnionFind::new(keys.len());
        for i in 0..keys.len() {
            if let Some(j) = (0..i).find(|&j| keys[j] == keys[i]) {
                uf.union(j, i);
            }
        }
        Partition::from_union_find(&mut uf, corpus_label)
    }

    pub fn singletons(len: usize, corpus_label: impl Into<String>) -> Partition {
        Partition {
            blocks: (0..len).map(|i| vec![i]).collect(),
            corpus_label: corpus_label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Index of the block containing `i`.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.binary_search(&i).is_ok())
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.block_of(i).is_some() && self.block_of(i) == self.block_of(j)
    }
}

/// True iff every block of `p` lies inside a block of `q`.
pub fn refines(p: &Partition, q: &Partition) -> Result<bool, RatioError> {
    if p.corpus_label != q.corpus_label || p.len() != q.len() {
        return Err(RatioError::CorpusMismatch {
            left: p.corpus_label.clone(),
            right: q.corpus_label.clone(),
        });
    }
    Ok(p.blocks.iter().all(|b| {
        let target = q.block_of(b[0]);
        b.iter().all(|&i| q.block_of(i) == target)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticPartition {
    pub partition: Partition,
    /// Set when closeness under the statistic's tolerance was not transitive
    /// on the corpus, so some block joins points that are not themselves
    /// within tolerance of each other.
    pub ambiguous: bool,
}

pub fn statistic_partition(
    s: &Statistic,
    corpus: &Corpus,
) -> Result<StatisticPartition, ModelError> {
    let values = corpus
        .points
        .iter()
        .map(|x| s.apply(x))
        .collect::<Result<Vec<_>, _>>()?;
    let n = values.len();
    let mut close = vec![vec![false; n]; n];
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        close[i][i] = true;
        for j in (i + 1)..n {
            if s.values_equal(&values[i], &values[j]) {
                close[i][j] = true;
                close[j][i] = true;
                uf.union(i, j);
            }
        }
    }
    let partition = Partition::from_union_find(&mut uf, corpus.label.clone());
    let ambiguous = partition
        .blocks
        .iter()
        .any(|b| b.iter().any(|&i| b.iter().any(|&j| !close[i][j])));
    Ok(StatisticPartition {
        partition,
        ambiguous,
    })
}
