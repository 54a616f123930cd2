use std::cmp::Ordering;

use num_bigint::BigInt;

use super::hv::dot;
use super::{ExactAccuracy, HdcError, IntHv};

/// The trained model: one bundled class vector per label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociativeMemory {
    class_hvs: Vec<IntHv>,
    norms_sq: Vec<i64>,
}

impl AssociativeMemory {
    pub fn new(class_hvs: Vec<IntHv>) -> Result<Self, HdcError> {
        let Some(first) = class_hvs.first() else {
            return Err(HdcError::Config("associative memory needs at least one class".into()));
        };
        let dim = first.dim();
        if let Some(bad) = class_hvs.iter().find(|hv| hv.dim() != dim) {
            return Err(HdcError::DimensionMismatch {
                left: dim,
                right: bad.dim(),
            });
        }
        let norms_sq = class_hvs.iter().map(IntHv::norm_sq).collect();
        Ok(Self { class_hvs, norms_sq })
    }

    pub fn class_hvs(&self) -> &[IntHv] {
        &self.class_hvs
    }

    pub fn num_classes(&self) -> usize {
        self.class_hvs.len()
    }

    pub fn dim(&self) -> usize {
        self.class_hvs[0].dim()
    }

    /// Classes that received no training samples and so can never be predicted.
    pub fn empty_classes(&self) -> Vec<usize> {
        self.norms_sq
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .map(|(c, _)| c)
            .collect()
    }

    /// Argmax of cosine similarity, smallest class index on ties.
    pub(crate) fn predict(&self, query: &[i32]) -> usize {
        let dots: Vec<i64> = self.class_hvs.iter().map(|c| dot(query, c.as_slice())).collect();
        argmax_scores(&dots, &self.norms_sq)
    }
}

/// Index of the most cosine-similar class given its dot product with the
/// query and its squared norm. Smallest index on ties.
pub(crate) fn argmax_scores(dots: &[i64], norms_sq: &[i64]) -> usize {
    let mut best = 0;
    for c in 1..dots.len() {
        if compare_scores(dots[c], norms_sq[c], dots[best], norms_sq[best]) == Ordering::Greater {
            best = c;
        }
    }
    best
}

/// Single-pass training: class vector `c` is the sum of every encoded sample
/// labelled `c`. Classes without samples stay all-zero.
pub fn train(encoded: &[(IntHv, usize)], num_classes: usize) -> Result<AssociativeMemory, HdcError> {
    let Some((first, _)) = encoded.first() else {
        return Err(HdcError::Config("training set is empty".into()));
    };
    let dim = first.dim();
    let mut class_hvs = vec![IntHv::zeros(dim); num_classes];
    for (hv, label) in encoded {
        let slot = class_hvs.get_mut(*label).ok_or(HdcError::LabelOutOfRange {
            label: *label,
            classes: num_classes,
        })?;
        slot.add_assign(hv)?;
    }
    AssociativeMemory::new(class_hvs)
}

fn sign(v: i64) -> i8 {
    v.signum() as i8
}

/// Compares `dot_a / sqrt(norm_a)` with `dot_b / sqrt(norm_b)` exactly.
/// A zero norm means similarity negative infinity.
pub(crate) fn compare_scores(dot_a: i64, norm_a: i64, dot_b: i64, norm_b: i64) -> Ordering {
    match (norm_a == 0, norm_b == 0) {
        (true, true) => return Ordering::Equal,
        (true, false) => return Ordering::Less,
        (false, true) => return Ordering::Greater,
        (false, false) => {}
    }
    let (sa, sb) = (sign(dot_a), sign(dot_b));
    if sa != sb {
        return sa.cmp(&sb);
    }
    if sa == 0 {
        return Ordering::Equal;
    }
    // Same non-zero sign: compare dot_a^2 * norm_b with dot_b^2 * norm_a.
    let magnitude = cross_compare(dot_a, norm_a, dot_b, norm_b);
    if sa > 0 {
        magnitude
    } else {
        magnitude.reverse()
    }
}

fn cross_compare(dot_a: i64, norm_a: i64, dot_b: i64, norm_b: i64) -> Ordering {
    let (da, db) = (i128::from(dot_a), i128::from(dot_b));
    let lhs = (da * da).checked_mul(i128::from(norm_b));
    let rhs = (db * db).checked_mul(i128::from(norm_a));
    match (lhs, rhs) {
        (Some(l), Some(r)) => l.cmp(&r),
        _ => {
            let l = BigInt::from(da * da) * BigInt::from(norm_b);
            let r = BigInt::from(db * db) * BigInt::from(norm_a);
            l.cmp(&r)
        }
    }
}

/// Orders `cos(q, a)` against `cos(q, b)` using integer arithmetic only.
/// `Greater` means `a` is the more similar vector.
pub fn compare_similarity(q: &IntHv, a: &IntHv, b: &IntHv) -> Result<Ordering, HdcError> {
    let dot_a = q.dot(a)?;
    let dot_b = q.dot(b)?;
    Ok(compare_scores(dot_a, a.norm_sq(), dot_b, b.norm_sq()))
}

pub fn infer(query: &IntHv, am: &AssociativeMemory) -> Result<usize, HdcError> {
    if query.dim() != am.dim() {
        return Err(HdcError::DimensionMismatch {
            left: query.dim(),
            right: am.dim(),
        });
    }
    Ok(am.predict(query.as_slice()))
}

pub fn evaluate(am: &AssociativeMemory, encoded_test: &[(IntHv, usize)]) -> Result<ExactAccuracy, HdcError> {
    if encoded_test.is_empty() {
        return Err(HdcError::EmptyTestSet);
    }
    let mut correct = 0u32;
    for (hv, label) in encoded_test {
        if infer(hv, am)? == *label {
            correct += 1;
        }
    }
    Ok(ExactAccuracy::new(correct, encoded_test.len() as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(v: &[i32]) -> IntHv {
        IntHv::new(v.to_vec()).unwrap()
    }

    #[test]
    fn self_similarity_beats_orthogonal() {
        let q = int(&[1, 2, -1, 0]);
        let orth = int(&[2, -1, 0, 5]);
        assert_eq!(q.dot(&orth).unwrap(), 0);
        assert_eq!(compare_similarity(&q, &q, &orth).unwrap(), Ordering::Greater);
        assert_eq!(compare_similarity(&q, &orth, &q).unwrap(), Ordering::Less);
        assert_eq!(compare_similarity(&q, &orth, &orth).unwrap(), Ordering::Equal);
    }

    #[test]
    fn scaling_does_not_change_cosine() {
        let q = int(&[3, -1, 2]);
        let a = int(&[1, 1, 1]);
        let a3 = int(&[3, 3, 3]);
        assert_eq!(compare_similarity(&q, &a, &a3).unwrap(), Ordering::Equal);
    }

    #[test]
    fn zero_class_is_minus_infinity() {
        let q = int(&[1, 1]);
        let zero = int(&[0, 0]);
        let anti = int(&[-1, -1]);
        assert_eq!(compare_similarity(&q, &anti, &zero).unwrap(), Ordering::Greater);
        assert_eq!(compare_similarity(&q, &zero, &zero).unwrap(), Ordering::Equal);
    }

    #[test]
    fn negative_dots_order_reversed() {
        let q = int(&[1, 0]);
        // cos = -1 vs cos = -1/sqrt(2)
        let a = int(&[-1, 0]);
        let b = int(&[-1, 1]);
        assert_eq!(compare_similarity(&q, &a, &b).unwrap(), Ordering::Less);
    }

    #[test]
    fn large_values_fall_back_to_bigint() {
        let big = i64::MAX / 4;
        assert_eq!(compare_scores(big, big, big, big), Ordering::Equal);
        assert_eq!(compare_scores(big, big, big - 1, big), Ordering::Greater);
        assert_eq!(compare_scores(-big, big, -big, big - 1), Ordering::Greater);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert!(compare_similarity(&int(&[1, 2]), &int(&[1]), &int(&[1, 2])).is_err());
        let am = AssociativeMemory::new(vec![int(&[1, 2])]).unwrap();
        assert!(infer(&int(&[1, 2, 3]), &am).is_err());
    }

    #[test]
    fn train_singletons_and_duplicates() {
        let a = int(&[1, -1, 3]);
        let b = int(&[0, 2, -2]);
        let am = train(&[(a.clone(), 0), (b.clone(), 1)], 2).unwrap();
        assert_eq!(am.class_hvs(), &[a.clone(), b.clone()]);
        let am = train(&[(a.clone(), 1), (a.clone(), 1)], 2).unwrap();
        assert_eq!(am.class_hvs()[1], int(&[2, -2, 6]));
        assert_eq!(am.empty_classes(), vec![0]);
    }

    #[test]
    fn train_rejects_out_of_range_labels() {
        assert_eq!(
            train(&[(int(&[1]), 3)], 2).unwrap_err(),
            HdcError::LabelOutOfRange { label: 3, classes: 2 }
        );
    }

    #[test]
    fn infer_tie_rule_and_exact_match() {
        let q = int(&[1, 2, -1, 0]);
        let orth = int(&[2, -1, 0, 5]);
        let am = AssociativeMemory::new(vec![q.clone(), orth.clone()]).unwrap();
        assert_eq!(infer(&q, &am).unwrap(), 0);
        let am = AssociativeMemory::new(vec![orth.clone(), orth.clone()]).unwrap();
        assert_eq!(infer(&q, &am).unwrap(), 0);
        let am = AssociativeMemory::new(vec![int(&[0, 0, 0, 0]), orth]).unwrap();
        assert_eq!(infer(&q, &am).unwrap(), 1);
    }

    #[test]
    fn evaluate_counts() {
        let c0 = int(&[1, 0, 0, 0]);
        let c1 = int(&[0, 1, 0, 0]);
        let am = AssociativeMemory::new(vec![c0.clone(), c1.clone()]).unwrap();
        let test = [(c0.clone(), 0), (c1.clone(), 1), (c1.clone(), 1), (c0.clone(), 1)];
        assert_eq!(evaluate(&am, &test).unwrap(), ExactAccuracy::new(3, 4));
        assert_eq!(evaluate(&am, &[]).unwrap_err(), HdcError::EmptyTestSet);
    }
}
