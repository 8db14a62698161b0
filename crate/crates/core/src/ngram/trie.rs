use rustc_hash::FxHashMap;

pub(crate) const ROOT: u32 = 0;

/// Reversed-context trie. The path `root → x_k → x_{k-1} → … → x_1` stands
/// for the n-gram `x_1 … x_k`, so a node's parent is the n-gram with its
/// oldest token dropped and the children of a node are its left extensions.
#[derive(Clone, Debug, Default)]
pub(crate) struct Trie {
    token: Vec<u32>,
    parent: Vec<u32>,
    depth: Vec<u8>,
    children: FxHashMap<(u32, u32), u32>,
}

impl Trie {
    pub fn new() -> Self {
        Trie {
            token: vec![u32::MAX],
            parent: vec![ROOT],
            depth: vec![0],
            children: FxHashMap::default(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.token.len()
    }

    #[inline]
    pub fn child(&self, node: u32, token: u32) -> Option<u32> {
        self.children.get(&(node, token)).copied()
    }

    /// Returns the child and whether it was just created.
    #[inline]
    pub fn child_or_insert(&mut self, node: u32, token: u32) -> (u32, bool) {
        let next = self.token.len() as u32;
        let mut created = false;
        let id = *self.children.entry((node, token)).or_insert_with(|| {
            created = true;
            next
        });
        if created {
            self.token.push(token);
            self.parent.push(node);
            self.depth.push(self.depth[node as usize] + 1);
        }
        (id, created)
    }

    #[inline]
    pub fn token(&self, node: u32) -> u32 {
        self.token[node as usize]
    }

    #[inline]
    pub fn parent(&self, node: u32) -> u32 {
        self.parent[node as usize]
    }

    #[inline]
    pub fn depth(&self, node: u32) -> usize {
        self.depth[node as usize] as usize
    }

    /// Node for an n-gram given oldest-first, if stored.
    pub fn find(&self, gram: &[u32]) -> Option<u32> {
        gram.iter().rev().try_fold(ROOT, |node, &t| self.child(node, t))
    }

    /// Creates every node on the path of `gram` (oldest-first).
    pub fn insert(&mut self, gram: &[u32]) -> u32 {
        gram.iter().rev().fold(ROOT, |node, &t| self.child_or_insert(node, t).0)
    }

    /// Tokens of the n-gram a node stands for, oldest first.
    pub fn gram(&self, mut node: u32) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.depth(node));
        while node != ROOT {
            out.push(self.token(node));
            node = self.parent(node);
        }
        out
    }

    pub fn shrink_to_fit(&mut self) {
        self.token.shrink_to_fit();
        self.parent.shrink_to_fit();
        self.depth.shrink_to_fit();
        self.children.shrink_to_fit();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_and_grams() {
        let mut t = Trie::new();
        let abc = t.insert(&[1, 2, 3]);
        assert_eq!(t.depth(abc), 3);
        assert_eq!(t.gram(abc), vec![1, 2, 3]);
        // suffixes exist, prefixes do not
        assert!(t.find(&[2, 3]).is_some());
        assert!(t.find(&[3]).is_some());
        assert!(t.find(&[1, 2]).is_none());
        assert_eq!(t.parent(abc), t.find(&[2, 3]).unwrap());
        assert_eq!(t.insert(&[1, 2, 3]), abc);
        assert_eq!(t.len(), 4);
    }
}
