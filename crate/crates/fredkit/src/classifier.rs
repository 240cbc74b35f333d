//! Symbolic classification of framed circle collections up to cobordism.
//!
//! A descriptor records everything the classification needs about an
//! index-one map: an opaque label for the homotopy class of its
//! linearization, whether that class is spin, and the multiset of circle
//! invariants (each preimage circle contributes its sigma in Z_2). Three
//! surgery moves rewrite descriptors without changing the cobordism class:
//!
//! * `Kill1` removes one sigma = 1 circle of a spin class,
//! * `Kill2` removes a pair of sigma = 0 circles of a spin class,
//! * `Kill1NonSpin` removes any one circle of a non-spin class.
//!
//! The moves are confluent: every maximal sequence ends at the same
//! normal form, namely the empty collection for non-spin classes and, for
//! spin classes, either the empty collection or a single sigma = 0 circle
//! depending on the parity of sigma = 0 circles (the tau invariant). Two
//! descriptors are cobordant exactly when their labels agree and, in the
//! spin case, their tau parities agree.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Descriptor of a framed circle collection: class label, spin flag and
/// the multiset of circle invariants, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FramedClassSymbolic {
    /// Opaque homotopy-class identifier; compared by equality only.
    pub label: String,
    pub spin: bool,
    /// Sorted multiset of circle invariants, each 0 or 1. For non-spin
    /// classes the values are carried but play no role.
    pub circles: Vec<u8>,
}

/// Terminal shape of a descriptor under the surgery moves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalForm {
    pub label: String,
    pub variant: NormalFormVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormalFormVariant {
    /// Spin class; `tau` is the parity of sigma = 0 circles, realized as
    /// the empty collection (tau = 0) or one sigma = 0 circle (tau = 1).
    Spin { tau: u8 },
    /// Non-spin class; every collection empties out.
    NonSpin,
}

/// A single legal rewrite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    /// Remove one sigma = 1 circle (spin classes only).
    Kill1,
    /// Remove one circle with the given sigma (non-spin classes only).
    Kill1NonSpin(u8),
    /// Remove two sigma = 0 circles (spin classes only).
    Kill2,
}

impl FramedClassSymbolic {
    pub fn new(label: impl Into<String>, spin: bool, circles: &[u8]) -> Result<Self> {
        if let Some(bad) = circles.iter().find(|&&c| c > 1) {
            return Err(Error::InvalidInput(format!(
                "circle invariant must be 0 or 1, got {bad}"
            )));
        }
        let mut circles = circles.to_vec();
        circles.sort_unstable();
        Ok(FramedClassSymbolic { label: label.into(), spin, circles })
    }

    /// Deserialize and validate a JSON descriptor
    /// `{"label": ..., "spin": ..., "circles": [...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            label: String,
            spin: bool,
            circles: Vec<u8>,
        }
        let raw: Raw = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("descriptor JSON: {e}")))?;
        FramedClassSymbolic::new(raw.label, raw.spin, &raw.circles)
    }

    fn count(&self, sigma: u8) -> usize {
        self.circles.iter().filter(|&&c| c == sigma).count()
    }

    fn remove(&self, sigma: u8, how_many: usize) -> Vec<u8> {
        let mut left = how_many;
        let mut out = Vec::with_capacity(self.circles.len() - how_many);
        for &c in &self.circles {
            if c == sigma && left > 0 {
                left -= 1;
            } else {
                out.push(c);
            }
        }
        out
    }

    /// Apply one surgery move, checking its precondition.
    pub fn apply_move(&self, mv: Move) -> Result<Self> {
        let circles = match mv {
            Move::Kill1 => {
                if !self.spin {
                    return Err(Error::IllegalMove(
                        "Kill1 applies to spin classes only".into(),
                    ));
                }
                if self.count(1) == 0 {
                    return Err(Error::IllegalMove(
                        "Kill1 needs a sigma = 1 circle".into(),
                    ));
                }
                self.remove(1, 1)
            }
            Move::Kill1NonSpin(sigma) => {
                if self.spin {
                    return Err(Error::IllegalMove(
                        "Kill1NonSpin applies to non-spin classes only".into(),
                    ));
                }
                if self.count(sigma) == 0 {
                    return Err(Error::IllegalMove(format!(
                        "no sigma = {sigma} circle to remove"
                    )));
                }
                self.remove(sigma, 1)
            }
            Move::Kill2 => {
                if !self.spin {
                    return Err(Error::IllegalMove(
                        "Kill2 applies to spin classes only".into(),
                    ));
                }
                if self.count(0) < 2 {
                    return Err(Error::IllegalMove(
                        "Kill2 needs two sigma = 0 circles".into(),
                    ));
                }
                self.remove(0, 2)
            }
        };
        Ok(FramedClassSymbolic { label: self.label.clone(), spin: self.spin, circles })
    }

    /// Every move legal at this descriptor.
    pub fn legal_moves(&self) -> Vec<Move> {
        let mut moves = Vec::new();
        if self.spin {
            if self.count(1) > 0 {
                moves.push(Move::Kill1);
            }
            if self.count(0) >= 2 {
                moves.push(Move::Kill2);
            }
        } else {
            for sigma in [0u8, 1] {
                if self.count(sigma) > 0 {
                    moves.push(Move::Kill1NonSpin(sigma));
                }
            }
        }
        moves
    }

    /// Parity of sigma = 0 circles: the residual invariant of spin classes.
    pub fn tau(&self) -> u8 {
        (self.count(0) % 2) as u8
    }

    /// Rewrite with legal moves until none applies and read off the
    /// terminal shape.
    pub fn normal_form(&self) -> NormalForm {
        let mut fc = self.clone();
        loop {
            let Some(&mv) = fc.legal_moves().first() else { break };
            fc = fc.apply_move(mv).expect("legal move");
        }
        let variant = if fc.spin {
            debug_assert!(fc.circles.len() <= 1 && fc.circles.iter().all(|&c| c == 0));
            NormalFormVariant::Spin { tau: fc.circles.len() as u8 }
        } else {
            debug_assert!(fc.circles.is_empty());
            NormalFormVariant::NonSpin
        };
        NormalForm { label: fc.label, variant }
    }
}

/// Decide cobordism of two descriptors: labels must agree and, for spin
/// classes, so must the tau parities. Errors when one label carries two
/// different spin flags — the flag is a property of the label, so that is
/// corrupt input, not a negative answer.
pub fn cobordant(a: &FramedClassSymbolic, b: &FramedClassSymbolic) -> Result<bool> {
    if a.label == b.label && a.spin != b.spin {
        return Err(Error::InconsistentSpin(a.label.clone()));
    }
    if a.label != b.label {
        return Ok(false);
    }
    Ok(a.normal_form() == b.normal_form())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(spin: bool, circles: &[u8]) -> FramedClassSymbolic {
        FramedClassSymbolic::new("L", spin, circles).unwrap()
    }

    #[test]
    fn moves_follow_their_preconditions() {
        let spin10 = fc(true, &[1, 0]);
        assert_eq!(spin10.apply_move(Move::Kill1).unwrap().circles, vec![0]);
        let spin00 = fc(true, &[0, 0]);
        assert!(spin00.apply_move(Move::Kill2).unwrap().circles.is_empty());

        let mut ns = fc(false, &[0, 1, 1]);
        for sigma in [1, 1, 0] {
            ns = ns.apply_move(Move::Kill1NonSpin(sigma)).unwrap();
        }
        assert!(ns.circles.is_empty());
    }

    #[test]
    fn illegal_moves_are_refused() {
        let cases: Vec<(FramedClassSymbolic, Move)> = vec![
            (fc(false, &[1]), Move::Kill1),
            (fc(true, &[0]), Move::Kill1),
            (fc(true, &[0]), Move::Kill2),
            (fc(true, &[1, 1]), Move::Kill1NonSpin(1)),
            (fc(false, &[1]), Move::Kill1NonSpin(0)),
        ];
        for (desc, mv) in cases {
            let res = desc.apply_move(mv);
            assert!(matches!(res, Err(Error::IllegalMove(_))), "{desc:?} {mv:?} -> {res:?}");
        }
    }

    #[test]
    fn normal_forms_read_off_tau() {
        assert_eq!(
            fc(true, &[0]).normal_form().variant,
            NormalFormVariant::Spin { tau: 1 }
        );
        assert_eq!(
            fc(true, &[1, 1, 0, 0]).normal_form().variant,
            NormalFormVariant::Spin { tau: 0 }
        );
        assert_eq!(fc(false, &[0, 0, 1]).normal_form().variant, NormalFormVariant::NonSpin);
    }

    #[test]
    fn cobordism_compares_labels_and_tau() {
        assert!(!cobordant(&fc(true, &[0]), &fc(true, &[0, 1, 0])).unwrap());
        assert!(cobordant(&fc(true, &[]), &fc(true, &[0, 0])).unwrap());
        assert!(cobordant(&fc(false, &[0]), &fc(false, &[1, 1, 1])).unwrap());
        let other = FramedClassSymbolic::new("M", true, &[0]).unwrap();
        assert!(!cobordant(&fc(true, &[0]), &other).unwrap());
    }

    #[test]
    fn same_label_with_conflicting_spin_is_corrupt() {
        let res = cobordant(&fc(true, &[0]), &fc(false, &[0]));
        assert!(matches!(res, Err(Error::InconsistentSpin(_))));
    }

    /// Every maximal move sequence from every start of size <= 6 reaches
    /// one and the same terminal descriptor.
    #[test]
    fn rewriting_is_confluent_up_to_size_six() {
        fn terminals(fc: &FramedClassSymbolic, acc: &mut Vec<Vec<u8>>) {
            let moves = fc.legal_moves();
            if moves.is_empty() {
                if !acc.contains(&fc.circles) {
                    acc.push(fc.circles.clone());
                }
                return;
            }
            for mv in moves {
                terminals(&fc.apply_move(mv).unwrap(), acc);
            }
        }
        for spin in [false, true] {
            for zeros in 0..=6usize {
                for ones in 0..=(6 - zeros) {
                    let circles: Vec<u8> =
                        std::iter::repeat(0).take(zeros).chain(std::iter::repeat(1).take(ones)).collect();
                    let start = fc(spin, &circles);
                    let mut acc = Vec::new();
                    terminals(&start, &mut acc);
                    assert_eq!(acc.len(), 1, "spin={spin} circles={circles:?}: {acc:?}");
                    let nf = start.normal_form();
                    let expect = match nf.variant {
                        NormalFormVariant::Spin { tau: 1 } => vec![0u8],
                        _ => vec![],
                    };
                    assert_eq!(acc[0], expect);
                }
            }
        }
    }

    /// Spin moves never change the parity of sigma = 0 circles.
    #[test]
    fn spin_moves_conserve_tau() {
        for zeros in 0..=6usize {
            for ones in 0..=(6 - zeros) {
                let circles: Vec<u8> =
                    std::iter::repeat(0).take(zeros).chain(std::iter::repeat(1).take(ones)).collect();
                let start = fc(true, &circles);
                for mv in start.legal_moves() {
                    assert_eq!(start.apply_move(mv).unwrap().tau(), start.tau(), "{mv:?}");
                }
            }
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let desc =
            FramedClassSymbolic::from_json(r#"{"label":"A","spin":true,"circles":[1,0]}"#)
                .unwrap();
        assert_eq!(desc.circles, vec![0, 1]);
        let text = serde_json::to_string(&desc).unwrap();
        assert_eq!(text, r#"{"label":"A","spin":true,"circles":[0,1]}"#);

        let bad = FramedClassSymbolic::from_json(r#"{"label":"A","spin":true,"circles":[2]}"#);
        assert!(matches!(bad, Err(Error::InvalidInput(_))));
        let malformed = FramedClassSymbolic::from_json("not json");
        assert!(matches!(malformed, Err(Error::InvalidInput(_))));
    }
}
