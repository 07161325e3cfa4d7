//! Content-addressed image store.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::ImageRef;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image bytes could not be decoded: {0}")]
    Undecodable(String),
    #[error("no bytes stored for image {0}")]
    Missing(String),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Decodable image bytes keyed by their SHA-256 digest.
#[derive(Debug, Default)]
pub struct ImageStore {
    blobs: RwLock<HashMap<String, Arc<[u8]>>>,
}

impl ImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decodes `bytes` to check they are an image, then stores them.
    pub fn insert(&self, uri: &str, bytes: Vec<u8>) -> Result<ImageRef, ImageError> {
        image::load_from_memory(&bytes).map_err(|e| ImageError::Undecodable(e.to_string()))?;
        let sha256 = sha256_hex(&bytes);
        self.blobs
            .write()
            .expect("image store poisoned")
            .entry(sha256.clone())
            .or_insert_with(|| Arc::from(bytes));
        Ok(ImageRef {
            uri: uri.to_string(),
            sha256,
        })
    }

    pub fn get(&self, image: &ImageRef) -> Result<Arc<[u8]>, ImageError> {
        self.blobs
            .read()
            .expect("image store poisoned")
            .get(&image.sha256)
            .cloned()
            .ok_or_else(|| ImageError::Missing(image.uri.clone()))
    }

    pub fn contains(&self, image: &ImageRef) -> bool {
        self.blobs
            .read()
            .expect("image store poisoned")
            .contains_key(&image.sha256)
    }

    pub fn len(&self) -> usize {
        self.blobs.read().expect("image store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn png() -> Vec<u8> {
        let img = image::RgbImage::from_pixel(2, 2, image::Rgb([10, 20, 30]));
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).unwrap();
        out.into_inner()
    }

    #[test]
    fn rejects_garbage() {
        let store = ImageStore::new();
        assert!(matches!(
            store.insert("x", b"not an image".to_vec()),
            Err(ImageError::Undecodable(_))
        ));
        assert!(store.is_empty());
    }

    #[test]
    fn identical_bytes_share_a_key() {
        let store = ImageStore::new();
        let a = store.insert("a.png", png()).unwrap();
        let b = store.insert("b.png", png()).unwrap();
        assert_eq!(a.sha256, b.sha256);
        assert_eq!(store.len(), 1);
        assert_eq!(&*store.get(&b).unwrap(), png().as_slice());
    }
}
