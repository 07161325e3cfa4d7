//! Prompt texts and the context blocks sent alongside them.
//!
//! The instruction texts are fixed; changing a single character changes the
//! request digests and invalidates recorded cassettes.

use chrono::{DateTime, Utc};

use crate::domain::{EvidenceItem, InformativeDescription, Post};

const QUERY_PROMPT_TEMPLATE: &str = "Given a tweet, you are required to generate {N} different queries from the tweet for the Google search engine to get the most relevant web content to fact-check the tweet. If the given tweet is not informative enough to generate a query, you should answer \"none\".";

pub const EXTRACTION_PROMPT: &str = "Given an article: 1. Quote its paragraphs, at most two, that explicitly and completely refute the given tweet. 2. Quote its paragraphs, at most two, that implicitly refute the given tweet. Such paragraphs often provide the tweet's context that can imply the tweet is cherry-picking by showing the full picture. If the article does not have such content or is irrelevant to the tweet, you should answer 'none.'";

pub const RESPONSE_PROMPT: &str = "You are required to respond to a tweet, given some facts as references. Your response should satisfy all the following requirements: \n- Your response should explain where and why the tweet is or is not misinformed or potentially\nmisleading. \n- You should prioritize the facts very close to the date the user tweeted, very recently, and listed at the beginning of the facts. \n- You should show the URLs that support your explanation. You should not number the URLs. \n- Your response should be informative and short. \n- Your response should start with 'This tweet is.'";

/// Image fusion prompt: instructions, eight worked examples, then the slots
/// for the image at hand.
pub const IMAGE_FUSION_TEMPLATE: &str = r#"Describe an image in an informative way. Your description should be only based on the given {short caption}, {name of each person}, and {raw text}. If the image is from social media, you should start with "A screenshot of". If the image is a quote from someone, you should start with "A quote from" followed by this person's name if there is any, then by the quoted text. If the image is an article, you should start with "An article". If the image is a photo, you should start with "A photo of". If the image is a map, you should start with "A map of". {raw text} may contain nonsense data that are unnecessarily included in the image description; however, {name of each person} is not, and if the concept in {raw text} has a conflict with that in {short caption} (e.g., "Robbie Lemos" versus "robbie leems" shown later), {raw text} is often the right one.
short caption: {a woman with glasses and a quote that says, in real life, i assure you there is no such thing as algebra}
name of each person: {Fran Lebowitz}
raw text: {"In real life, I assure you, there is no such thing as algebra."}
image description: {A quote from Fran Lebowitz, "In real life, I assure you, there is no such thing as algebra."}
short caption: {two men in suits}
name of each person: {Jim Caviezel, Michael Emerson}
raw text: {}
image description: {A photo of Jim Caviezel and Michael Emerson in suits}
short caption: {robbie leems on twitter}
name of each person: {}
raw text: {Robbie Lemos @RobbieLemos 1d I'd like to congratulate my dear friend Deep Mind on a wonderful 1st day at work today at Google. Just in time for #EarthDay2023, cheers brother! 1 2 3,790}
image description: {A screenshot of a post of Robbie Lemos, "I'd like to congratulate my dear friend Deep Mind on a wonderful 1st day at work today at Google. Just in time for #EarthDay2023, cheers brother!" The post was posted on Twitter.}
short caption: {a moose}
name of each person: {}
raw text: {Yahoo Finance @YahooFinance Typically, the stock market bottoms four to five months before a recession ends, but RBC's research details that it has bottomed as early as nine months before the end of a recession. finance.yahoo.com Could the stock market power through a recession? 'This would be rare.' 09:57 22/4/2023 3.4,011 Views 1 Retweet 1 Quote 5 Likes 1 Bookmark}
image description: {A screenshot of a post from Yahoo Finance, "Typically, the stock market bottoms four to five months before a recession ends, but RBC's research details that it has bottomed as early as nine months before the end of a recession." The post shared an article from finance.yahoo.com claiming, "Could the stock market power through a recession? 'This would be rare.'" with a picture of a moose. The post was posted at 09:57 22/4/2023.}
short caption: {a person pouring tea into a cup}
name of each person: {}
raw text: {New research reveals how coffee and tea can affect risk of early death for adults with diabetes By Sandee LaMotte, CNN Updated 7:01 PM EDT, Wed April 19, 2023 f The health benefits of tea 01:10 - Source: CNN}
image description: {An article claiming, "New research reveals how coffee and tea can affect risk of early death for adults with diabetes." It attached a picture of a person pouring tea into a cup. It was written by Sandee LaMotte, published by CNN, and updated at 7:01 PM EDT, Wed April 19, 2023.}
short caption: {two people standing next to each other with the words love is blind}
name of each person: {Nick Lachey}
raw text: {\"Love Is Blind\" co-host faceplants with a regressive line of questioning Hayley Miller MSNBC DAILY MSNBC}
image description: {An article claiming, "'Love Is Blind' co-host faceplants with a regressive line of questioning." It attached a picture of Nick Lachey and another person standing next to each other. It was written by Hayley Miller and published by MSNBC.}
short caption: {a bar graph that shows how engaged are the most followed journalists on twitter}
name of each person: {Rahul Kanwal}
raw text: {How engaged are the most-followed journalists on Twitter? Percentage of tweets from each journalist that are at-replies BDUTT 64%
image description: {A bar graph showing how engaged the most followed journalists, including Rahul Kanwal, are on Twitter through the percentage of tweets from each journalist that are at-replies. The chart was made by mattmaldre.com.}
short caption: {a graph showing the global defense budget by region}
name of each person: {}
raw text: {Global Defense Budgets by Region ($ Billions) $1,000 800 600 400 200 0 2020 2021 2022 2023 2024 2025 Asia-Pacific Latin America North America Sub-Saharan Africa Europe Middle East & North Africa Russia & Commonwealth of Independent States Source: Aviation Week}
image description: {A graph showing the global defense budget by region. It is from Aviation Week.}
short caption: {[IMAGE_CAPTION]}
name of each person: {[CELEBRITIES]}
raw text: {[OCR]}
image description:"#;

/// Openers the fusion prompt asks for, by image type.
pub const DESCRIPTION_OPENERS: [&str; 5] = ["A screenshot of", "A quote from", "An article", "A photo of", "A map of"];

pub fn query_prompt(n: usize) -> String {
    QUERY_PROMPT_TEMPLATE.replace("{N}", &n.to_string())
}

pub fn image_fusion_prompt(caption: &str, celebrities: &[String], ocr: &str) -> String {
    IMAGE_FUSION_TEMPLATE
        .replace("[IMAGE_CAPTION]", &one_line(caption))
        .replace("[CELEBRITIES]", &celebrities.join(", "))
        .replace("[OCR]", &one_line(ocr))
}

/// Slot values of the image at hand, read back from a fusion prompt.
/// Used by scripted backends.
pub fn parse_fusion_slots(prompt: &str) -> Option<(String, Vec<String>, String)> {
    let tail = prompt.rsplit_once("\nshort caption: {")?.1;
    let (caption, rest) = tail.split_once("}\nname of each person: {")?;
    let (names, rest) = rest.split_once("}\nraw text: {")?;
    let (ocr, _) = rest.rsplit_once("}\nimage description:")?;
    let names = names
        .split(',')
        .map(str::trim)
        .filter(|n| !n.is_empty())
        .map(str::to_string)
        .collect();
    Some((caption.to_string(), names, ocr.to_string()))
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn format_time(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%d %H:%M UTC").to_string()
}

fn format_date(t: Option<DateTime<Utc>>) -> String {
    t.map_or_else(|| "unknown".to_string(), |t| t.format("%Y-%m-%d").to_string())
}

fn descriptions_line(descriptions: &[InformativeDescription]) -> Option<String> {
    let parts: Vec<&str> = descriptions
        .iter()
        .map(|d| d.description.trim())
        .filter(|d| !d.is_empty())
        .collect();
    (!parts.is_empty()).then(|| parts.join(" "))
}

/// Tweet block for query generation: text, image descriptions, time and
/// poster name.
pub fn tweet_context_brief(post: &Post, descriptions: &[InformativeDescription]) -> String {
    let mut out = format!("Tweet: {}\n", post.text.trim());
    if let Some(images) = descriptions_line(descriptions) {
        out.push_str(&format!("Images: {images}\n"));
    }
    out.push_str(&format!("Time: {}\n", format_time(post.created_at)));
    out.push_str(&format!("Poster name: {}", post.author_name));
    out
}

/// Tweet block for extraction and response generation; adds the poster's
/// screen name and profile description.
pub fn tweet_context_full(post: &Post, descriptions: &[InformativeDescription]) -> String {
    let mut out = tweet_context_brief(post, descriptions);
    out.push_str(&format!("\nPoster screen name: @{}", post.author_screen_name.trim_start_matches('@')));
    out.push_str(&format!("\nPoster description: {}", post.author_description));
    out
}

pub fn article_context(content: &str, published_at: Option<DateTime<Utc>>) -> String {
    format!("Article published date: {}\nArticle content: {}", format_date(published_at), content)
}

pub fn extraction_context(
    article_text: &str,
    published_at: Option<DateTime<Utc>>,
    post: &Post,
    descriptions: &[InformativeDescription],
) -> String {
    format!(
        "{}\n\n{}",
        article_context(article_text, published_at),
        tweet_context_full(post, descriptions)
    )
}

/// Facts block: one line per quote, in the order given.
pub fn facts_block(evidence: &[EvidenceItem]) -> String {
    let mut out = String::from("Facts:");
    for item in evidence {
        out.push_str(&format!(
            "\n- \"{}\" Source: {} Published: {}",
            one_line(&item.quote),
            item.source_url,
            format_date(item.published_at)
        ));
    }
    out
}

pub fn response_context(post: &Post, descriptions: &[InformativeDescription], evidence: &[EvidenceItem]) -> String {
    format!("{}\n\n{}", tweet_context_full(post, descriptions), facts_block(evidence))
}
