use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::baselines::Pca;
use crate::error::Result;
use crate::graph::{cosine_similarity, Adjacency};
use crate::numcore::Matrix;

/// Raw embeddings plus their 2-D principal-component projection.
#[derive(Debug, Clone)]
pub struct EmbeddingExport {
    pub projection: Matrix,
    pub pca: Pca,
}

/// Writes `embeddings.csv` (name + `d` coordinates) and
/// `embeddings_pca2d.csv` (name + first two principal coordinates) into `dir`.
pub fn export_embeddings(
    names: &[String],
    embeddings: &Matrix,
    dir: impl AsRef<Path>,
) -> Result<EmbeddingExport> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let d = embeddings.cols();

    let mut out = BufWriter::new(File::create(dir.join("embeddings.csv"))?);
    let header: Vec<String> = (0..d).map(|c| format!("e{c}")).collect();
    writeln!(out, "sensor_name,{}", header.join(","))?;
    for (i, name) in names.iter().enumerate() {
        let coords: Vec<String> = embeddings.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{name},{}", coords.join(","))?;
    }
    out.flush()?;

    let components = 2.min(d).min(embeddings.rows());
    let pca = Pca::fit(embeddings, components)?;
    let projection = pca.transform(embeddings);
    let mut out = BufWriter::new(File::create(dir.join("embeddings_pca2d.csv"))?);
    writeln!(out, "sensor_name,pc1,pc2")?;
    for (i, name) in names.iter().enumerate() {
        let pc1 = projection.get(i, 0);
        let pc2 = if projection.cols() > 1 {
            projection.get(i, 1)
        } else {
            0.0
        };
        writeln!(out, "{name},{pc1},{pc2}")?;
    }
    out.flush()?;
    Ok(EmbeddingExport { projection, pca })
}

/// Writes the edge list `src,dst,cosine` for every edge of `adjacency`.
/// Returns the number of edges written.
pub fn export_graph(
    names: &[String],
    embeddings: &Matrix,
    adjacency: &Adjacency,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "src,dst,cosine")?;
    let edges = adjacency.edges();
    for &(j, i) in &edges {
        let score = cosine_similarity(embeddings.row(i), embeddings.row(j));
        writeln!(out, "{},{},{score}", names[j], names[i])?;
    }
    out.flush()?;
    Ok(edges.len())
}
