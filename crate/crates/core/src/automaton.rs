//! Deterministic finite automata and their transition structure matrices.
//!
//! States and labels are 1-indexed at every public boundary. A word
//! `σ_1 … σ_k` is read left to right, so its structure-matrix product is
//! `F_{σ_k} ⋯ F_{σ_1}` with the rightmost factor consuming the first letter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// A DFA with a partial transition function and no designated initial or
/// accepting states: a word is accepted when some state can read all of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    num_states: usize,
    num_labels: usize,
    // table[(state - 1) * num_labels + (label - 1)] = target state (1-indexed)
    table: Vec<Option<usize>>,
}

impl Dfa {
    /// Builds a DFA from `(from, label, to)` triples. Repeating an identical
    /// triple is harmless; two different targets for one `(from, label)` is not.
    pub fn new<I>(num_states: usize, num_labels: usize, transitions: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize)>,
    {
        if num_states == 0 || num_labels == 0 {
            return Err(Error::InvalidArgument(
                "automaton needs at least one state and one label".into(),
            ));
        }
        let mut table = vec![None; num_states * num_labels];
        for (from, label, to) in transitions {
            check_state(from, num_states)?;
            check_state(to, num_states)?;
            check_label(label, num_labels)?;
            let slot = &mut table[(from - 1) * num_labels + (label - 1)];
            match slot {
                Some(existing) if *existing != to => {
                    return Err(Error::Nondeterministic { state: from, label })
                }
                _ => *slot = Some(to),
            }
        }
        Ok(Self {
            num_states,
            num_labels,
            table,
        })
    }

    /// One state with a self-loop on every label: the unconstrained case.
    pub fn unconstrained(num_labels: usize) -> Result<Self> {
        Self::new(1, num_labels, (1..=num_labels).map(|j| (1, j, 1)))
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn next(&self, state: usize, label: usize) -> Option<usize> {
        if state == 0 || state > self.num_states || label == 0 || label > self.num_labels {
            return None;
        }
        self.table[(state - 1) * self.num_labels + (label - 1)]
    }

    /// All transitions as `(from, label, to)`, sorted.
    pub fn transitions(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for s in 1..=self.num_states {
            for j in 1..=self.num_labels {
                if let Some(t) = self.next(s, j) {
                    out.push((s, j, t));
                }
            }
        }
        out
    }

    /// Runs `word` from `start`; `None` as soon as a transition is undefined.
    pub fn run(&self, start: usize, word: &[usize]) -> Option<Vec<usize>> {
        let mut states = Vec::with_capacity(word.len() + 1);
        let mut q = start;
        states.push(q);
        for &label in word {
            q = self.next(q, label)?;
            states.push(q);
        }
        Some(states)
    }
}

fn check_state(state: usize, num_states: usize) -> Result<()> {
    if state == 0 || state > num_states {
        Err(Error::StateOutOfRange { state, num_states })
    } else {
        Ok(())
    }
}

fn check_label(label: usize, num_labels: usize) -> Result<()> {
    if label == 0 || label > num_labels {
        Err(Error::LabelOutOfRange { label, num_labels })
    } else {
        Ok(())
    }
}

/// Checks a word is nonempty with every label in `1..=num_labels`.
pub fn validate_word(word: &[usize], num_labels: usize) -> Result<()> {
    if word.is_empty() {
        return Err(Error::EmptyWord);
    }
    word.iter().try_for_each(|&l| check_label(l, num_labels))
}

/// Transition structure matrices: `F_j[s, t] = 1` iff label `j` moves state `t` to `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tsm {
    blocks: Vec<Mat>,
}

impl Tsm {
    /// Validates raw 0/1 blocks (square, equal size, at most one 1 per column).
    pub fn from_blocks(blocks: Vec<Mat>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidTsm("no blocks".into()))?;
        let l = first.nrows();
        for (j, f) in blocks.iter().enumerate() {
            if f.nrows() != l || f.ncols() != l {
                return Err(Error::InvalidTsm(format!(
                    "block {} is {}x{}, expected {l}x{l}",
                    j + 1,
                    f.nrows(),
                    f.ncols()
                )));
            }
            if f.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidTsm(format!("block {} has entries other than 0/1", j + 1)));
            }
            for t in 0..l {
                if f.column(t).sum() > 1.0 {
                    return Err(Error::Nondeterministic {
                        state: t + 1,
                        label: j + 1,
                    });
                }
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    /// `F_label`, 1-indexed.
    pub fn block(&self, label: usize) -> Result<&Mat> {
        check_label(label, self.num_labels())?;
        Ok(&self.blocks[label - 1])
    }

    pub fn num_states(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn num_labels(&self) -> usize {
        self.blocks.len()
    }

    pub fn to_dfa(&self) -> Dfa {
        let mut edges = Vec::new();
        for (j, f) in self.blocks.iter().enumerate() {
            for t in 0..f.ncols() {
                for s in 0..f.nrows() {
                    if f[(s, t)] == 1.0 {
                        edges.push((t + 1, j + 1, s + 1));
                    }
                }
            }
        }
        Dfa::new(self.num_states(), self.num_labels(), edges)
            .expect("validated blocks describe a deterministic automaton")
    }
}

pub fn build_tsm(dfa: &Dfa) -> Tsm {
    let l = dfa.num_states();
    let mut blocks = vec![Mat::zeros(l, l); dfa.num_labels()];
    for (from, label, to) in dfa.transitions() {
        blocks[label - 1][(to - 1, from - 1)] = 1.0;
    }
    Tsm { blocks }
}

/// `F_{σ_k} ⋯ F_{σ_1}`.
pub fn word_product(tsm: &Tsm, word: &[usize]) -> Result<Mat> {
    validate_word(word, tsm.num_labels())?;
    let mut acc = tsm.blocks[word[0] - 1].clone();
    for &label in &word[1..] {
        acc = &tsm.blocks[label - 1] * acc;
    }
    Ok(acc)
}

pub fn is_accepted(tsm: &Tsm, word: &[usize]) -> Result<bool> {
    Ok(word_product(tsm, word)?.iter().any(|&v| v != 0.0))
}

/// Some state returns to itself after reading the word, so every power of it is accepted.
pub fn is_repeatable_cycle(tsm: &Tsm, word: &[usize]) -> Result<bool> {
    let p = word_product(tsm, word)?;
    Ok((0..p.nrows()).any(|i| p[(i, i)] != 0.0))
}

/// A concrete run of the automaton: `states[i + 1] = f(states[i], word[i])`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptancePath {
    pub states: Vec<usize>,
    pub word: Vec<usize>,
}

impl AcceptancePath {
    /// Edges as `(from, label, to)` triples.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        self.word
            .iter()
            .enumerate()
            .map(|(i, &l)| (self.states[i], l, self.states[i + 1]))
            .collect()
    }

    /// Checks every step against the automaton.
    pub fn is_valid_for(&self, dfa: &Dfa) -> bool {
        self.states.len() == self.word.len() + 1
            && self
                .edges()
                .iter()
                .all(|&(from, label, to)| dfa.next(from, label) == Some(to))
    }
}

/// First run (lowest start state) that reads the whole word.
pub fn find_path(dfa: &Dfa, word: &[usize]) -> Option<AcceptancePath> {
    if word.is_empty() {
        return None;
    }
    (1..=dfa.num_states()).find_map(|start| {
        dfa.run(start, word).map(|states| AcceptancePath {
            states,
            word: word.to_vec(),
        })
    })
}

/// First run that reads the word and ends where it started.
pub fn find_cycle_path(dfa: &Dfa, word: &[usize]) -> Option<AcceptancePath> {
    if word.is_empty() {
        return None;
    }
    (1..=dfa.num_states()).find_map(|start| {
        dfa.run(start, word)
            .filter(|states| states.last() == Some(&start))
            .map(|states| AcceptancePath {
                states,
                word: word.to_vec(),
            })
    })
}
