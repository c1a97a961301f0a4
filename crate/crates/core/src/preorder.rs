//! Source pre-ordering: permute source tokens so they follow target order.

use crate::corpus_io::Alignment;

/// Reorders `source` so its alignment to the target becomes monotone.
///
/// An aligned token is keyed by the smallest target index it links to.
/// Unaligned tokens travel with the nearest aligned token to their left
/// (keeping their original order behind it); unaligned tokens before the
/// first aligned one go first. Equal keys keep their original order.
///
/// Returns the permuted tokens and the alignment re-indexed to the new
/// source positions. Links with a source index outside `source` are dropped.
pub fn monotone_preorder(source: &[String], alignment: &Alignment) -> (Vec<String>, Alignment) {
    let order = preorder_permutation(source.len(), alignment);
    let mut new_pos = vec![0usize; source.len()];
    for (new, &old) in order.iter().enumerate() {
        new_pos[old] = new;
    }
    let tokens = order.iter().map(|&i| source[i].clone()).collect();
    let links = alignment
        .links()
        .iter()
        .filter(|&&(i, _)| i < source.len())
        .map(|&(i, j)| (new_pos[i], j));
    (tokens, Alignment::new(links))
}

/// `order[k]` is the original index of the token placed at position `k`.
pub fn preorder_permutation(source_len: usize, alignment: &Alignment) -> Vec<usize> {
    let mut first_target: Vec<Option<usize>> = vec![None; source_len];
    for &(i, j) in alignment.links() {
        if i < source_len {
            first_target[i] = Some(first_target[i].map_or(j, |k: usize| k.min(j)));
        }
    }

    // (target key, anchor index, original index); key -1 for leading unaligned
    let mut keys: Vec<(i64, usize, usize)> = Vec::with_capacity(source_len);
    let mut anchor: Option<(i64, usize)> = None;
    for (i, ft) in first_target.iter().enumerate() {
        let key = match ft {
            Some(j) => {
                anchor = Some((*j as i64, i));
                (*j as i64, i, i)
            }
            None => {
                let (k, a) = anchor.unwrap_or((-1, 0));
                (k, a, i)
            }
        };
        keys.push(key);
    }
    let mut order: Vec<usize> = (0..source_len).collect();
    order.sort_by_key(|&i| (keys[i].0, keys[i].1, keys[i].2));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::tokenize;

    #[test]
    fn monotone_input_unchanged() {
        let src = tokenize("a b c");
        let a = Alignment::new([(0, 0), (1, 1), (2, 2)]);
        let (s, na) = monotone_preorder(&src, &a);
        assert_eq!(s, src);
        assert_eq!(na, a);
    }

    #[test]
    fn reversal() {
        let (s, na) = monotone_preorder(&tokenize("a b c"), &Alignment::new([(0, 2), (1, 1), (2, 0)]));
        assert_eq!(s, tokenize("c b a"));
        assert_eq!(na.links(), &[(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn unaligned_follows_left_neighbour() {
        let (s, na) = monotone_preorder(&tokenize("a u b"), &Alignment::new([(0, 1), (2, 0)]));
        assert_eq!(s, tokenize("b a u"));
        assert_eq!(na.links(), &[(0, 0), (1, 1)]);
    }

    #[test]
    fn leading_unaligned_goes_first() {
        let (s, _) = monotone_preorder(&tokenize("u v a b"), &Alignment::new([(2, 1), (3, 0)]));
        assert_eq!(s, tokenize("u v b a"));
    }

    #[test]
    fn unaligned_stays_with_anchor_on_equal_keys() {
        // a and c both link to target 0; u stays directly behind a
        let (s, _) = monotone_preorder(&tokenize("a u c"), &Alignment::new([(0, 0), (2, 0)]));
        assert_eq!(s, tokenize("a u c"));
    }
}
