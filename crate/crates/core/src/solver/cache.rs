use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::image::Texture;
use crate::model::{EyeRegionModel, TEXTURE_MODES};

/// Face textures keyed by the exact bits of the texture coefficients.
///
/// Most residual evaluations in a fit share the same coefficients, so the
/// PCA combination is computed once per distinct vector.
pub struct TextureCache {
    entries: Mutex<HashMap<[u64; TEXTURE_MODES], Arc<Texture>>>,
    capacity: usize,
}

impl TextureCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            capacity: capacity.max(1),
        }
    }

    pub fn get(&self, model: &EyeRegionModel, tau: &[f64; TEXTURE_MODES]) -> Result<Arc<Texture>> {
        let key = tau.map(f64::to_bits);
        if let Some(t) = self.entries.lock().expect("texture cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let texture = Arc::new(model.texture_sample(tau)?);
        let mut entries = self.entries.lock().expect("texture cache poisoned");
        if entries.len() >= self.capacity {
            entries.clear();
        }
        entries.insert(key, Arc::clone(&texture));
        Ok(texture)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("texture cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for TextureCache {
    fn default() -> Self {
        Self::new(64)
    }
}
