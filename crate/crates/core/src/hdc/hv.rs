use super::HdcError;

fn check_dims(left: usize, right: usize) -> Result<(), HdcError> {
    if left == right {
        Ok(())
    } else {
        Err(HdcError::DimensionMismatch { left, right })
    }
}

fn rotate<T: Copy>(elems: &[T], shift: i64) -> Vec<T> {
    let d = elems.len();
    let s = shift.rem_euclid(d as i64) as usize;
    let mut out = elems.to_vec();
    // out[(i + s) mod d] = elems[i]
    out.rotate_right(s);
    out
}

/// Hypervector with every element in {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BipolarHv {
    elems: Vec<i8>,
}

impl BipolarHv {
    pub fn new(elems: Vec<i8>) -> Result<Self, HdcError> {
        if elems.is_empty() {
            return Err(HdcError::EmptyVector);
        }
        if let Some((index, &value)) = elems.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
            return Err(HdcError::NotBipolar {
                index,
                value: i64::from(value),
            });
        }
        Ok(Self { elems })
    }

    /// Caller guarantees every element is +-1.
    pub(crate) fn from_raw(elems: Vec<i8>) -> Self {
        debug_assert!(elems.iter().all(|&v| v == 1 || v == -1));
        Self { elems }
    }

    pub fn dim(&self) -> usize {
        self.elems.len()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.elems
    }

    /// Binding: elementwise product.
    pub fn multiply(&self, other: &BipolarHv) -> Result<BipolarHv, HdcError> {
        check_dims(self.dim(), other.dim())?;
        let elems = self.elems.iter().zip(&other.elems).map(|(a, b)| a * b).collect();
        Ok(Self::from_raw(elems))
    }

    /// Cyclic shift: `result[(i + shift) mod d] = self[i]`. Negative shifts rotate left.
    pub fn permute(&self, shift: i64) -> BipolarHv {
        Self::from_raw(rotate(&self.elems, shift))
    }

    pub fn hamming(&self, other: &BipolarHv) -> Result<usize, HdcError> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.elems.iter().zip(&other.elems).filter(|(a, b)| a != b).count())
    }

    pub fn to_int(&self) -> IntHv {
        IntHv {
            elems: self.elems.iter().map(|&v| i32::from(v)).collect(),
        }
    }

    pub(crate) fn flip_range(&mut self, range: std::ops::Range<usize>) {
        for v in &mut self.elems[range] {
            *v = -*v;
        }
    }
}

/// Integer hypervector: encoded samples and bundled class vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntHv {
    elems: Vec<i32>,
}

impl IntHv {
    pub fn new(elems: Vec<i32>) -> Result<Self, HdcError> {
        if elems.is_empty() {
            return Err(HdcError::EmptyVector);
        }
        Ok(Self { elems })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "hypervector dimension must be positive");
        Self { elems: vec![0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.elems.len()
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.elems
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [i32] {
        &mut self.elems
    }

    /// Bundling: elementwise sum.
    pub fn add(&self, other: &IntHv) -> Result<IntHv, HdcError> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &IntHv) -> Result<(), HdcError> {
        check_dims(self.dim(), other.dim())?;
        for (a, b) in self.elems.iter_mut().zip(&other.elems) {
            *a += b;
        }
        Ok(())
    }

    pub fn permute(&self, shift: i64) -> IntHv {
        IntHv {
            elems: rotate(&self.elems, shift),
        }
    }

    pub fn dot(&self, other: &IntHv) -> Result<i64, HdcError> {
        check_dims(self.dim(), other.dim())?;
        Ok(dot(&self.elems, &other.elems))
    }

    pub fn norm_sq(&self) -> i64 {
        dot(&self.elems, &self.elems)
    }

    pub fn is_zero(&self) -> bool {
        self.elems.iter().all(|&v| v == 0)
    }

    pub fn max_abs(&self) -> u32 {
        self.elems.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }
}

#[inline]
pub(crate) fn dot(a: &[i32], b: &[i32]) -> i64 {
    a.iter().zip(b).map(|(&x, &y)| i64::from(x) * i64::from(y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(v: &[i32]) -> IntHv {
        IntHv::new(v.to_vec()).unwrap()
    }

    fn bip(v: &[i8]) -> BipolarHv {
        BipolarHv::new(v.to_vec()).unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(int(&[1, 2]).add(&int(&[0, 0])).unwrap(), int(&[1, 2]));
        assert_eq!(int(&[1, -1]).add(&int(&[-1, 1])).unwrap(), int(&[0, 0]));
        assert_eq!(int(&[2, 3, 4]).add(&int(&[1, 1, 1])).unwrap(), int(&[3, 4, 5]));
    }

    #[test]
    fn add_rejects_mismatched_dims() {
        let err = int(&[1, 2]).add(&int(&[1])).unwrap_err();
        assert_eq!(err, HdcError::DimensionMismatch { left: 2, right: 1 });
    }

    #[test]
    fn multiply_examples() {
        let x = bip(&[1, -1, -1, 1]);
        assert_eq!(bip(&[1, 1, 1, 1]).multiply(&x).unwrap(), x);
        assert_eq!(x.multiply(&x).unwrap(), bip(&[1, 1, 1, 1]));
        assert_eq!(bip(&[1, -1, 1]).multiply(&bip(&[-1, -1, 1])).unwrap(), bip(&[-1, 1, 1]));
        assert!(bip(&[1]).multiply(&x).is_err());
    }

    #[test]
    fn rejects_non_bipolar() {
        assert_eq!(
            BipolarHv::new(vec![1, 0, -1]).unwrap_err(),
            HdcError::NotBipolar { index: 1, value: 0 }
        );
        assert_eq!(BipolarHv::new(vec![]).unwrap_err(), HdcError::EmptyVector);
    }

    #[test]
    fn permute_examples() {
        let x = int(&[1, 2, 3, 4]);
        assert_eq!(x.permute(0), x);
        assert_eq!(x.permute(1), int(&[4, 1, 2, 3]));
        assert_eq!(x.permute(4), x);
        assert_eq!(x.permute(-1), int(&[2, 3, 4, 1]));
        let b = bip(&[1, -1, -1, 1, 1]);
        assert_eq!(b.permute(2), bip(&[1, 1, 1, -1, -1]));
    }

    fn bipolar_strategy(d: usize) -> impl Strategy<Value = BipolarHv> {
        proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], d).prop_map(BipolarHv::from_raw)
    }

    proptest! {
        #[test]
        fn multiply_algebra(
            (a, b, c) in (1usize..64).prop_flat_map(|d| (bipolar_strategy(d), bipolar_strategy(d), bipolar_strategy(d)))
        ) {
            prop_assert_eq!(a.multiply(&b).unwrap(), b.multiply(&a).unwrap());
            prop_assert_eq!(
                a.multiply(&b).unwrap().multiply(&c).unwrap(),
                a.multiply(&b.multiply(&c).unwrap()).unwrap()
            );
            prop_assert_eq!(a.multiply(&b).unwrap().multiply(&b).unwrap(), a.clone());
        }

        #[test]
        fn permute_inverse(x in (1usize..64).prop_flat_map(bipolar_strategy), s in 0usize..64) {
            let d = x.dim();
            let s = s % (d + 1);
            prop_assert_eq!(x.permute(s as i64).permute((d - s) as i64), x.clone());
            prop_assert_eq!(x.permute(s as i64).dim(), d);
        }
    }
}
