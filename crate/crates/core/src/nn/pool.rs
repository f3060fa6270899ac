use super::Tensor;
use crate::error::{Error, Result};

/// Non-overlapping max pooling along time. A trailing partial window is kept.
pub fn maxpool1d(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::Config("pool factor must be >= 1".into()));
    }
    if x.is_empty() {
        return Err(Error::dim("max pooling over an empty time axis"));
    }
    let out_len = x.len().div_ceil(factor);
    let mut out = Vec::with_capacity(x.channels() * out_len);
    for c in 0..x.channels() {
        out.extend(
            x.row(c)
                .chunks(factor)
                .map(|w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        );
    }
    Tensor::new(x.channels(), out)
}

/// Routes each output gradient to the first maximal input of its window.
pub fn maxpool1d_backward(x: &Tensor, factor: usize, grad_out: &Tensor) -> Tensor {
    let len = x.len();
    let mut dx = Tensor::zeros(x.channels(), len);
    for c in 0..x.channels() {
        let src = x.row(c);
        let g = grad_out.row(c);
        for (w, &gw) in g.iter().enumerate() {
            let start = w * factor;
            let end = (start + factor).min(len);
            let mut best = start;
            for i in start + 1..end {
                if src[i] > src[best] {
                    best = i;
                }
            }
            dx.data_mut()[c * len + best] += gw;
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_max() {
        let y = maxpool1d(&Tensor::vector(vec![1.0, 3.0, 2.0, 4.0]), 2).unwrap();
        assert_eq!(y.data(), &[3.0, 4.0]);
    }

    #[test]
    fn partial_window_kept() {
        let y = maxpool1d(&Tensor::vector(vec![5.0]), 2).unwrap();
        assert_eq!(y.data(), &[5.0]);
        let y = maxpool1d(&Tensor::vector(vec![1.0, 2.0, -7.0]), 2).unwrap();
        assert_eq!(y.data(), &[2.0, -7.0]);
    }

    #[test]
    fn factor_one_is_identity() {
        let x = Tensor::new(2, vec![1.0, -2.0, 3.0, 0.5, 0.25, 9.0]).unwrap();
        assert_eq!(maxpool1d(&x, 1).unwrap(), x);
    }

    #[test]
    fn errors() {
        assert!(matches!(maxpool1d(&Tensor::zeros(1, 0), 2), Err(Error::Dimension(_))));
        assert!(maxpool1d(&Tensor::zeros(1, 3), 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn output_is_ceil(len in 1usize..100, factor in 1usize..7) {
            let y = maxpool1d(&Tensor::zeros(3, len), factor).unwrap();
            proptest::prop_assert_eq!(y.len(), len.div_ceil(factor));
            proptest::prop_assert_eq!(y.channels(), 3);
        }
    }
}
