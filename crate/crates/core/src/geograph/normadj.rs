use crate::geograph::Graph;
use crate::numcore::CsrMatrix;

/// `D^-1/2 (A + I) D^-1/2` with `D` the degree matrix of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj(CsrMatrix);

impl NormAdj {
    pub fn csr(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n_rows()
    }

    /// The adjacency of a graph without edges.
    pub fn identity(n: usize) -> Self {
        NormAdj(CsrMatrix::identity(n))
    }
}

impl AsRef<CsrMatrix> for NormAdj {
    fn as_ref(&self) -> &CsrMatrix {
        &self.0
    }
}

pub fn normalize_adjacency(g: &Graph) -> NormAdj {
    let n = g.node_count();
    let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut triplets = Vec::with_capacity(n + 2 * g.edges().len());
    for i in 0..n {
        triplets.push((i, i, 1.0 / deg[i]));
    }
    for e in g.edges() {
        let w = 1.0 / (deg[e.i] * deg[e.j]).sqrt();
        triplets.push((e.i, e.j, w));
        triplets.push((e.j, e.i, w));
    }
    NormAdj(CsrMatrix::from_triplets(n, n, &triplets).expect("indices come from the graph"))
}
