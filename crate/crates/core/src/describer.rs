//! Informative image descriptions from caption, people and OCR text.

use futures::future::join_all;

use crate::domain::{ImageRef, InformativeDescription};
use crate::gateway::{ProviderError, Session, CAPTION_PROMPT};
use crate::prompts::image_fusion_prompt;

/// Captions, recognizes people and reads text in `image`, then fuses the
/// three through the chat model. A blank fusion reply falls back to the
/// caption.
pub async fn describe(session: &Session, image: &ImageRef) -> Result<InformativeDescription, ProviderError> {
    let (caption, celebrities, ocr_text) = tokio::try_join!(
        session.caption(image),
        session.recognize_celebrities(image),
        session.ocr(image)
    )?;
    let ocr_text = ocr_text.trim().to_string();

    if caption.is_empty() && celebrities.is_empty() && ocr_text.is_empty() {
        return Ok(InformativeDescription {
            image: image.clone(),
            caption,
            celebrities,
            ocr_text,
            description: String::new(),
        });
    }

    let reply = session
        .chat(&image_fusion_prompt(&caption, &celebrities, &ocr_text), "")
        .await?;
    let fused = unwrap_braces(&reply);
    let description = if fused.is_empty() {
        tracing::warn!(image = %image.uri, "empty fusion reply, using caption");
        caption_as_description(&caption)
    } else {
        fused
    };
    Ok(InformativeDescription {
        image: image.clone(),
        caption,
        celebrities,
        ocr_text,
        description,
    })
}

/// Describes each image; results keep the input order.
pub async fn describe_all(
    session: &Session,
    images: &[ImageRef],
) -> Vec<Result<InformativeDescription, ProviderError>> {
    join_all(images.iter().map(|image| describe(session, image))).await
}

/// The examples show descriptions wrapped in braces; models often copy that.
fn unwrap_braces(reply: &str) -> String {
    let trimmed = reply.trim();
    let trimmed = trimmed.strip_prefix("image description:").unwrap_or(trimmed).trim();
    match trimmed.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
        Some(inner) => inner.trim().to_string(),
        None => trimmed.to_string(),
    }
}

fn caption_as_description(caption: &str) -> String {
    let caption = caption.trim();
    if caption.is_empty() {
        return String::new();
    }
    if caption.to_lowercase().starts_with(&CAPTION_PROMPT.to_lowercase()) {
        caption.to_string()
    } else {
        format!("{CAPTION_PROMPT} {caption}")
    }
}
