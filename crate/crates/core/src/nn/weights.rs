//! Weights file for a trained autoencoder bundle.
//!
//! The header lists every network's layer widths and activation tags, the
//! normalization box and the training metadata; parameters follow as one
//! `W` and one `b` matrix per layer, in layer order, row-major.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::autoencoder::{AutoencoderBundle, Normalization, TrainingSummary};
use super::network::{DenseLayer, DenseNetwork};
use super::Activation;
use crate::error::{Error, Result};
use crate::textio::{join_list, TextDoc};

const KIND: &str = "autoencoder";
const VERSION: u32 = 1;

fn push_network(doc: &mut TextDoc, name: &str, net: &DenseNetwork) {
    doc.set(&format!("{name}.dims"), join_list(&net.layer_dims()));
    let tags: Vec<&str> = net.activations().iter().map(|a| a.tag()).collect();
    doc.set(&format!("{name}.activations"), tags.join(","));
    for (l, layer) in net.layers().iter().enumerate() {
        let w = layer.weights.as_standard_layout();
        doc.push_matrix(
            &format!("{name}.W{l}"),
            layer.outputs(),
            layer.inputs(),
            w.iter().copied().collect(),
        );
        doc.push_matrix(&format!("{name}.b{l}"), 1, layer.outputs(), layer.bias.to_vec());
    }
}

fn read_network(doc: &TextDoc, name: &str) -> Result<DenseNetwork> {
    let dims: Vec<usize> = doc.get_list(&format!("{name}.dims"))?;
    let acts: Vec<Activation> = doc.get_list(&format!("{name}.activations"))?;
    if dims.len() < 2 || acts.len() + 1 != dims.len() {
        return Err(Error::parse(KIND, format!("inconsistent layer list for `{name}`")));
    }
    let mut layers = Vec::with_capacity(acts.len());
    for (l, activation) in acts.into_iter().enumerate() {
        let w = doc.matrix(&format!("{name}.W{l}"))?;
        let b = doc.matrix(&format!("{name}.b{l}"))?;
        if w.rows != dims[l + 1] || w.cols != dims[l] || b.data.len() != dims[l + 1] {
            return Err(Error::parse(KIND, format!("layer {l} of `{name}` has the wrong shape")));
        }
        layers.push(DenseLayer {
            weights: Array2::from_shape_vec((w.rows, w.cols), w.data.clone())
                .map_err(|e| Error::Shape(e.to_string()))?,
            bias: Array1::from(b.data.clone()),
            activation,
        });
    }
    DenseNetwork::from_layers(layers)
}

impl AutoencoderBundle {
    pub fn to_doc(&self) -> TextDoc {
        let mut doc = TextDoc::new(KIND, VERSION);
        doc.set("n", self.dim())
            .set("m", self.latent_dim())
            .set("norm.lower", join_list(self.norm.lower()))
            .set("norm.upper", join_list(self.norm.upper()))
            .set("seed", self.summary.seed)
            .set("epochs", self.summary.epochs)
            .set("batches_per_epoch", self.summary.batches_per_epoch)
            .set("final_loss", self.summary.final_loss)
            .set("epoch_losses", join_list(&self.summary.epoch_losses))
            .set("discriminator", self.discriminator.is_some())
            .set("surrogate", self.surrogate.is_some());
        push_network(&mut doc, "encoder", &self.encoder);
        push_network(&mut doc, "decoder", &self.decoder);
        if let Some(d) = &self.discriminator {
            push_network(&mut doc, "discriminator", d);
        }
        if let Some(s) = &self.surrogate {
            push_network(&mut doc, "surrogate", s);
        }
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self> {
        if doc.version != VERSION {
            return Err(Error::parse(KIND, format!("unsupported version {}", doc.version)));
        }
        let norm = Normalization::new(doc.get_list("norm.lower")?, doc.get_list("norm.upper")?)?;
        let encoder = read_network(doc, "encoder")?;
        let decoder = read_network(doc, "decoder")?;
        let discriminator = if doc.get::<bool>("discriminator")? {
            Some(read_network(doc, "discriminator")?)
        } else {
            None
        };
        let surrogate = if doc.get::<bool>("surrogate")? {
            Some(read_network(doc, "surrogate")?)
        } else {
            None
        };
        let mut bundle = AutoencoderBundle::from_parts(encoder, decoder, discriminator, surrogate, norm)?;
        bundle.summary = TrainingSummary {
            seed: doc.get("seed")?,
            epochs: doc.get("epochs")?,
            batches_per_epoch: doc.get("batches_per_epoch")?,
            epoch_losses: doc.get_list("epoch_losses")?,
            final_loss: doc.get("final_loss")?,
        };
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_doc().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&TextDoc::read(path, KIND)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::TrainConfig;

    #[test]
    fn reload_is_bit_exact() {
        let norm = Normalization::new(vec![-50.0; 7], vec![50.0; 7]).unwrap();
        let cfg = TrainConfig {
            discriminator: true,
            surrogate: true,
            seed: 4,
            ..TrainConfig::default()
        };
        let mut bundle = AutoencoderBundle::new(norm, 3, &cfg).unwrap();
        bundle.summary.epoch_losses = vec![0.5, 0.25 + 1e-17, 1.0 / 3.0];
        bundle.summary.final_loss = 0.1;
        for l in bundle.encoder.layers_mut() {
            l.bias.iter_mut().enumerate().for_each(|(i, b)| *b = (i as f64 * 0.37).sin() / 7.0);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ae.txt");
        bundle.save(&path).unwrap();
        let back = AutoencoderBundle::load(&path).unwrap();
        assert_eq!(back, bundle);
        let z = [0.2, 0.7, 0.9];
        assert_eq!(back.decode(&z), bundle.decode(&z));
        let x = [1.0, -3.5, 49.9, 0.0, 12.0, -0.001, 7.0];
        assert_eq!(back.encode(&x), bundle.encode(&x));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let norm = Normalization::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let bundle = AutoencoderBundle::new(norm, 1, &TrainConfig::default()).unwrap();
        let text = bundle.to_doc().to_text();
        let cut = &text[..text.len() / 2];
        assert!(TextDoc::parse(cut, KIND).and_then(|d| AutoencoderBundle::from_doc(&d)).is_err());
    }
}
