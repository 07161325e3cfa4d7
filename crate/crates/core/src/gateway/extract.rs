//! Built-in page fetcher and main-content extractor.

use async_trait::async_trait;
use base64::Engine;
use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use scraper::{ElementRef, Html, Selector};
use std::sync::LazyLock;
use std::time::Duration;
use url::Url;

use super::{Backend, EncodedImage, ExtractedContent, ProviderError, ProviderRequest, ProviderResponse};

#[derive(Debug, Clone)]
pub struct FetchedPage {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

#[async_trait]
pub trait PageFetcher: Send + Sync {
    async fn fetch(&self, url: &Url) -> Result<FetchedPage, String>;
}

pub struct HttpFetcher {
    client: reqwest::Client,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Self {
        Self {
            client: reqwest::Client::builder()
                .timeout(timeout)
                .user_agent(concat!("veracity/", env!("CARGO_PKG_VERSION")))
                .build()
                .expect("reqwest client builds with static settings"),
        }
    }
}

#[async_trait]
impl PageFetcher for HttpFetcher {
    async fn fetch(&self, url: &Url) -> Result<FetchedPage, String> {
        let response = self.client.get(url.clone()).send().await.map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = response.bytes().await.map_err(|e| e.to_string())?.to_vec();
        Ok(FetchedPage {
            status,
            content_type,
            body,
        })
    }
}

/// Answers `ExtractContent` by fetching HTML and extracting the article.
pub struct HtmlExtractor<F> {
    fetcher: F,
}

impl<F: PageFetcher> HtmlExtractor<F> {
    pub fn new(fetcher: F) -> Self {
        Self { fetcher }
    }
}

#[async_trait]
impl<F: PageFetcher> Backend for HtmlExtractor<F> {
    async fn call(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let ProviderRequest::ExtractContent { url: raw } = request else {
            return Err(ProviderError::NotConfigured { kind: request.kind() });
        };
        let url = Url::parse(raw).map_err(|e| ProviderError::FetchFailed {
            url: raw.clone(),
            reason: e.to_string(),
        })?;
        let page = self.fetcher.fetch(&url).await.map_err(|reason| ProviderError::FetchFailed {
            url: raw.clone(),
            reason,
        })?;
        if !(200..300).contains(&page.status) {
            return Err(ProviderError::FetchFailed {
                url: raw.clone(),
                reason: format!("HTTP {}", page.status),
            });
        }
        if let Some(ct) = &page.content_type {
            if !ct.contains("html") && !ct.starts_with("text/") {
                return Err(ProviderError::ExtractionEmpty { url: raw.clone() });
            }
        }
        let html = String::from_utf8_lossy(&page.body);
        let article = extract_article(&html, &url);
        if article.main_text.trim().is_empty() {
            return Err(ProviderError::ExtractionEmpty { url: raw.clone() });
        }
        let main_image = match &article.main_image {
            Some(image_url) => match self.fetcher.fetch(image_url).await {
                Ok(fetched) if (200..300).contains(&fetched.status) && image::load_from_memory(&fetched.body).is_ok() => {
                    Some(EncodedImage {
                        uri: image_url.to_string(),
                        data: base64::engine::general_purpose::STANDARD.encode(&fetched.body),
                    })
                }
                _ => None,
            },
            None => None,
        };
        Ok(ProviderResponse::Page(ExtractedContent {
            title: article.title,
            main_text: article.main_text,
            main_image,
            published_at: article.published_at,
        }))
    }
}

/// Result of [`extract_article`]; the image is a URL, not yet fetched.
#[derive(Debug, Clone, PartialEq)]
pub struct Article {
    pub title: String,
    pub main_text: String,
    pub main_image: Option<Url>,
    pub published_at: Option<DateTime<Utc>>,
}

fn sel(css: &str) -> Selector {
    Selector::parse(css).expect("static selector")
}

static TITLE_META: LazyLock<Selector> = LazyLock::new(|| sel(r#"meta[property="og:title"]"#));
static TITLE: LazyLock<Selector> = LazyLock::new(|| sel("title"));
static H1: LazyLock<Selector> = LazyLock::new(|| sel("h1"));
static IMAGE_META: LazyLock<Selector> = LazyLock::new(|| sel(r#"meta[property="og:image"], meta[name="twitter:image"]"#));
static DATE_META: LazyLock<Selector> = LazyLock::new(|| {
    sel(concat!(
        r#"meta[property="article:published_time"], meta[name="pubdate"], meta[name="publishdate"], "#,
        r#"meta[name="date"], meta[name="dc.date"], meta[name="DC.date.issued"], "#,
        r#"meta[name="parsely-pub-date"], meta[name="sailthru.date"], meta[itemprop="datePublished"]"#
    ))
});
static TIME: LazyLock<Selector> = LazyLock::new(|| sel("time[datetime]"));
static JSON_LD: LazyLock<Selector> = LazyLock::new(|| sel(r#"script[type="application/ld+json"]"#));
static CONTAINERS: LazyLock<Selector> = LazyLock::new(|| sel(r#"[itemprop="articleBody"], article, main, [role="main"]"#));
static BLOCKS: LazyLock<Selector> = LazyLock::new(|| sel("p, h2, h3, h4, li, blockquote, pre"));
static PARAGRAPH_PARENTS: LazyLock<Selector> = LazyLock::new(|| sel("div, section, td, body"));

const SKIP_ANCESTORS: &[&str] = &["nav", "aside", "footer", "header", "script", "style", "noscript", "form", "figcaption"];

/// Extracts title, main text, lead image and publication date from HTML.
/// Main text is the readable blocks of the article container, joined by
/// blank lines. Pages without any body text yield an empty `main_text`.
pub fn extract_article(html: &str, base: &Url) -> Article {
    let doc = Html::parse_document(html);
    let title = meta_content(&doc, &TITLE_META)
        .or_else(|| first_text(&doc, &TITLE))
        .or_else(|| first_text(&doc, &H1))
        .unwrap_or_default();
    let main_image = meta_content(&doc, &IMAGE_META).and_then(|raw| base.join(&raw).ok());
    let published_at = published_at(&doc);
    Article {
        title,
        main_text: main_text(&doc),
        main_image,
        published_at,
    }
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn element_text(el: ElementRef<'_>) -> String {
    collapse(&el.text().collect::<String>())
}

fn meta_content(doc: &Html, selector: &Selector) -> Option<String> {
    doc.select(selector)
        .filter_map(|m| m.value().attr("content"))
        .map(collapse)
        .find(|c| !c.is_empty())
}

fn first_text(doc: &Html, selector: &Selector) -> Option<String> {
    doc.select(selector).map(element_text).find(|t| !t.is_empty())
}

fn published_at(doc: &Html) -> Option<DateTime<Utc>> {
    doc.select(&DATE_META)
        .filter_map(|m| m.value().attr("content"))
        .chain(doc.select(&TIME).filter_map(|t| t.value().attr("datetime")))
        .find_map(parse_date)
        .or_else(|| {
            doc.select(&JSON_LD).find_map(|script| {
                let value: serde_json::Value = serde_json::from_str(&script.text().collect::<String>()).ok()?;
                json_ld_date(&value)
            })
        })
}

fn json_ld_date(value: &serde_json::Value) -> Option<DateTime<Utc>> {
    match value {
        serde_json::Value::Object(map) => map
            .get("datePublished")
            .and_then(|v| v.as_str())
            .and_then(parse_date)
            .or_else(|| map.get("@graph").and_then(json_ld_date)),
        serde_json::Value::Array(items) => items.iter().find_map(json_ld_date),
        _ => None,
    }
}

/// Accepts RFC 3339, common ISO variants and bare dates (midnight UTC).
pub fn parse_date(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%z", "%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%d %H:%M:%S%z"] {
        if let Ok(dt) = DateTime::parse_from_str(raw, fmt) {
            return Some(dt.with_timezone(&Utc));
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.and_utc());
        }
    }
    let date_part = raw.get(..10).unwrap_or(raw);
    NaiveDate::parse_from_str(date_part, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
}

fn skipped(el: ElementRef<'_>) -> bool {
    el.ancestors()
        .filter_map(ElementRef::wrap)
        .any(|a| SKIP_ANCESTORS.contains(&a.value().name()))
}

/// True when a block sits inside another block we would also collect.
fn nested_block(el: ElementRef<'_>, root: ElementRef<'_>) -> bool {
    el.ancestors()
        .take_while(|a| a.id() != root.id())
        .filter_map(ElementRef::wrap)
        .any(|a| matches!(a.value().name(), "p" | "li" | "blockquote" | "pre"))
}

fn blocks_of(root: ElementRef<'_>) -> Vec<String> {
    root.select(&BLOCKS)
        .filter(|el| !skipped(*el) && !nested_block(*el, root))
        .map(element_text)
        .filter(|t| !t.is_empty())
        .collect()
}

fn main_text(doc: &Html) -> String {
    let from_container = doc
        .select(&CONTAINERS)
        .filter(|c| !skipped(*c))
        .map(blocks_of)
        .filter(|blocks| !blocks.is_empty())
        .max_by_key(|blocks| blocks.iter().map(String::len).sum::<usize>());
    let blocks = from_container.or_else(|| densest_paragraph_parent(doc)).unwrap_or_default();
    blocks.join("\n\n")
}

/// Fallback for pages without semantic containers: the element whose direct
/// `<p>` children hold the most text.
fn densest_paragraph_parent(doc: &Html) -> Option<Vec<String>> {
    doc.select(&PARAGRAPH_PARENTS)
        .filter(|el| !skipped(*el))
        .filter_map(|el| {
            let paragraphs: Vec<String> = el
                .children()
                .filter_map(ElementRef::wrap)
                .filter(|c| c.value().name() == "p")
                .map(element_text)
                .filter(|t| !t.is_empty())
                .collect();
            let total: usize = paragraphs.iter().map(String::len).sum();
            (total > 0).then_some((total, paragraphs))
        })
        .max_by_key(|(total, _)| *total)
        .map(|(_, paragraphs)| paragraphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn base() -> Url {
        Url::parse("https://news.example.org/2021/story").unwrap()
    }

    #[test]
    fn article_container_wins_over_chrome() {
        let html = r#"<html><head><title>T</title>
            <meta property="article:published_time" content="2021-03-04T05:06:07Z">
            <meta property="og:image" content="/img/lead.png"></head>
            <body><nav><p>Home</p><p>World</p></nav>
            <article><h1>Head</h1><p>First  paragraph.</p><blockquote><p>Quoted.</p></blockquote>
            <aside><p>Related link</p></aside><p>Second paragraph.</p></article>
            <footer><p>Copyright</p></footer></body></html>"#;
        let a = extract_article(html, &base());
        assert_eq!(a.title, "T");
        assert_eq!(a.main_text, "First paragraph.\n\nQuoted.\n\nSecond paragraph.");
        assert_eq!(a.main_image.unwrap().as_str(), "https://news.example.org/img/lead.png");
        assert_eq!(a.published_at, Some(Utc.with_ymd_and_hms(2021, 3, 4, 5, 6, 7).unwrap()));
    }

    #[test]
    fn falls_back_to_densest_div() {
        let html = r#"<body><div><p>short</p></div>
            <div class="c"><p>A longer body paragraph.</p><p>Another one.</p></div></body>"#;
        let a = extract_article(html, &base());
        assert_eq!(a.main_text, "A longer body paragraph.\n\nAnother one.");
    }

    #[test]
    fn page_without_body_is_empty() {
        let html = r#"<html><body><nav><a href="/">Home</a></nav><footer><p>(c) 2021</p></footer></body></html>"#;
        assert_eq!(extract_article(html, &base()).main_text, "");
    }

    #[test]
    fn dates_from_time_and_json_ld() {
        let html = r#"<article><time datetime="2020-12-01">Dec 1</time><p>x</p></article>"#;
        assert_eq!(
            extract_article(html, &base()).published_at,
            Some(Utc.with_ymd_and_hms(2020, 12, 1, 0, 0, 0).unwrap())
        );
        let html = r#"<script type="application/ld+json">{"@graph":[{"@type":"NewsArticle","datePublished":"2019-05-06T07:08:09+02:00"}]}</script><p>x</p>"#;
        assert_eq!(
            extract_article(html, &base()).published_at,
            Some(Utc.with_ymd_and_hms(2019, 5, 6, 5, 8, 9).unwrap())
        );
    }

    struct StaticFetcher(u16, &'static str);

    #[async_trait]
    impl PageFetcher for StaticFetcher {
        async fn fetch(&self, _url: &Url) -> Result<FetchedPage, String> {
            Ok(FetchedPage {
                status: self.0,
                content_type: Some("text/html".into()),
                body: self.1.as_bytes().to_vec(),
            })
        }
    }

    #[tokio::test]
    async fn extractor_maps_failures() {
        let req = ProviderRequest::ExtractContent {
            url: "https://x.org/a".into(),
        };
        let missing = HtmlExtractor::new(StaticFetcher(404, ""));
        assert!(matches!(missing.call(&req).await, Err(ProviderError::FetchFailed { .. })));
        let empty = HtmlExtractor::new(StaticFetcher(200, "<nav>menu</nav>"));
        assert!(matches!(empty.call(&req).await, Err(ProviderError::ExtractionEmpty { .. })));
        let ok = HtmlExtractor::new(StaticFetcher(200, "<article><p>Body.</p></article>"));
        match ok.call(&req).await.unwrap() {
            ProviderResponse::Page(page) => assert_eq!(page.main_text, "Body."),
            other => panic!("{other:?}"),
        }
    }
}
