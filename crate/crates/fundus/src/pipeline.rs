//! Preprocessing chain shared by training and prediction:
//! locate the disc, crop the ROI, resize, optionally augment, encode.

use fundus_core::data::{
    augment, crop_roi, crop_sample, decode_prediction, encode_label, locate_disc, paste_mask, resize_image, resize_mask,
    roi_origin, Dihedral, LabelMask, Region, Sample,
};
use fundus_core::eval::ensemble_mean;
use fundus_core::models::{classifier_predict, xunet_forward, Model};
use fundus_core::training::{ClsItem, SegItem};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Roi {
    /// Box-blur window of the disc localizer.
    pub window: usize,
    /// Side of the square crop around the disc.
    pub crop: usize,
    /// Side the crop is resized to.
    pub input: usize,
}

fn ops(augmented: bool) -> &'static [Dihedral] {
    if augmented {
        &Dihedral::ALL
    } else {
        &[Dihedral::Identity]
    }
}

/// The ROI of `sample` resized to the network input, mask included.
pub fn roi_sample(sample: &Sample, roi: Roi) -> Result<Sample> {
    let center = locate_disc(&sample.image, roi.window);
    let cropped = crop_sample(sample, center, roi.crop)?;
    Ok(Sample {
        image: resize_image(&cropped.image, roi.input, roi.input)?,
        mask: cropped.mask.as_ref().map(|m| resize_mask(m, roi.input, roi.input)).transpose()?,
        ..cropped
    })
}

/// Training pairs for the X-Unet, eight per sample when augmenting.
pub fn seg_items(samples: &[Sample], roi: Roi, augmented: bool) -> Result<Vec<SegItem>> {
    let mut items = Vec::new();
    for s in samples {
        let base = roi_sample(s, roi)?;
        for &op in ops(augmented) {
            let a = augment(&base, op)?;
            let mask = a.mask.as_ref().ok_or_else(|| Error::DatasetInvalid(format!("{} has no mask", s.id)))?;
            items.push(SegItem { input: a.image.to_tensor(), target: encode_label(mask) });
        }
    }
    Ok(items)
}

/// Training pairs for the classifier at one input size.
pub fn cls_items(samples: &[Sample], roi: Roi, augmented: bool) -> Result<Vec<ClsItem>> {
    let mut items = Vec::new();
    for s in samples {
        let label = s.glaucoma_label.ok_or_else(|| Error::DatasetInvalid(format!("{} has no glaucoma label", s.id)))?;
        let center = locate_disc(&s.image, roi.window);
        let image = resize_image(&crop_roi(&s.image, center, roi.crop)?, roi.input, roi.input)?;
        for &op in ops(augmented) {
            let a = augment(&Sample { id: s.id.clone(), image: image.clone(), mask: None, glaucoma_label: None, true_cdr: None }, op)?;
            items.push(ClsItem { input: a.image.to_tensor(), label: f64::from(label) });
        }
    }
    Ok(items)
}

/// Full-frame mask predicted by an X-Unet: the decoded ROI prediction is
/// resized back to the crop and pasted into an all-background frame.
pub fn predict_mask(model: &mut Model, sample: &Sample, roi: Roi, t_cup: f64, t_disc: f64) -> Result<LabelMask> {
    let (w, h) = (sample.image.width(), sample.image.height());
    let center = locate_disc(&sample.image, roi.window);
    let origin = roi_origin(w, h, center, roi.crop)?;
    let patch = resize_image(&crop_roi(&sample.image, center, roi.crop)?, roi.input, roi.input)?;
    let map = xunet_forward(model, &patch.to_tensor())?;
    let decoded = resize_mask(&decode_prediction(&map, t_cup, t_disc)?, roi.crop, roi.crop)?;
    let mut frame = LabelMask::filled(w, h, Region::Background)?;
    paste_mask(&mut frame, &decoded, origin)?;
    Ok(frame)
}

/// Mean glaucoma probability over every (model, input size) pair.
pub fn predict_prob(models: &mut [(Model, Vec<usize>)], sample: &Sample, window: usize, crop: usize) -> Result<f64> {
    let center = locate_disc(&sample.image, window);
    let roi = crop_roi(&sample.image, center, crop)?;
    let mut probs = Vec::new();
    for (model, sizes) in models.iter_mut() {
        for &n in sizes.iter() {
            let x = resize_image(&roi, n, n)?.to_tensor();
            probs.push(classifier_predict(model, &x)?[0]);
        }
    }
    Ok(ensemble_mean(&probs)?)
}
