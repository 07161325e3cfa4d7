//! The twenty fixture scenarios and the publisher registry they run against.

use chrono::{DateTime, Duration, TimeZone, Utc};

use crate::world::{ImageSpec, PageSpec, ResponseStyle, Scenario};

/// Registry CSV the scenarios assume.
pub const REGISTRY_CSV: &str = "\
domain,factuality,bias
wire-report.example,very high,least biased
science-desk.example,very high,pro-science
daily-ledger.example,high,left-center
metro-times.example,high,right-center
civic-review.example,mostly factual,least biased
open-forum.example,mixed,left
";

pub const SCENARIO_COUNT: usize = 20;

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 3, 1, 12, 0, 0).unwrap()
}

fn days_before(post: DateTime<Utc>, days: i64) -> Option<DateTime<Utc>> {
    Some(post - Duration::days(days))
}

struct Builder {
    scenario: Scenario,
}

impl Builder {
    fn new(index: usize, name: &str, keyword: &str, text: &str) -> Self {
        Self {
            scenario: Scenario {
                name: name.into(),
                keyword: keyword.into(),
                text: text.into(),
                created_at: base_time() + Duration::hours(index as i64),
                author_name: "Casey Morgan".into(),
                author_screen_name: "caseym".into(),
                author_description: "Opinions are my own.".into(),
                images: Vec::new(),
                pages: Vec::new(),
                out_of_scope_hits: Vec::new(),
                queries_none: false,
                response: ResponseStyle::Compliant,
            },
        }
    }

    fn url(&self, domain: &str, slug: &str) -> String {
        format!("https://{domain}/{}/{slug}", self.scenario.name)
    }

    fn page(mut self, domain: &str, slug: &str, relevance: f64, age_days: Option<i64>, f: impl FnOnce(PageSpec) -> PageSpec) -> Self {
        let published = age_days.and_then(|d| days_before(self.scenario.created_at, d));
        let spec = f(PageSpec::new(&self.url(domain, slug), relevance, published));
        self.scenario.pages.push(spec);
        self
    }

    fn image(mut self, image: ImageSpec) -> Self {
        self.scenario.images.push(image);
        self
    }

    fn out_of_scope(mut self, domain: &str, slug: &str) -> Self {
        let url = self.url(domain, slug);
        self.scenario.out_of_scope_hits.push(url);
        self
    }

    fn queries_none(mut self) -> Self {
        self.scenario.queries_none = true;
        self
    }

    fn response(mut self, style: ResponseStyle) -> Self {
        self.scenario.response = style;
        self
    }

    fn build(self) -> Scenario {
        self.scenario
    }
}

const WIRE: &str = "wire-report.example";
const SCIENCE: &str = "science-desk.example";
const DAILY: &str = "daily-ledger.example";
const METRO: &str = "metro-times.example";
const CIVIC: &str = "civic-review.example";
const FORUM: &str = "open-forum.example";
const RUMOR: &str = "rumor-mill.example";

/// All fixture scenarios, in a fixed order.
pub fn scenarios() -> Vec<Scenario> {
    let list = vec![
        Builder::new(0, "text_refuted", "quellbrook", "BREAKING: the Quellbrook dam collapsed overnight and the town is flooded https://t.co/abc")
            .page(WIRE, "dam-intact", 97.0, Some(1), |p| {
                p.explicit("Inspectors confirmed on Tuesday that the Quellbrook dam is intact and operating normally.")
            })
            .page(SCIENCE, "dam-sensors", 95.0, Some(2), |p| {
                p.explicit("Sensor data from the Quellbrook reservoir shows no breach at any point this week.")
            })
            .page(DAILY, "dam-rumor", 93.0, Some(1), |p| {
                p.explicit("Local officials called the Quellbrook collapse story a hoax.")
            })
            .build(),
        Builder::new(1, "text_context_only", "marrowfen", "Marrowfen council doubled parking fees in a single year")
            .page(METRO, "fees-history", 94.0, Some(3), |p| {
                p.implicit("The Marrowfen fee increase followed eight years without any change to parking charges.")
            })
            .page(DAILY, "fees-budget", 92.0, Some(5), |p| {
                p.implicit("Even after the change, Marrowfen parking remains cheaper than in neighbouring towns.")
            })
            .build(),
        Builder::new(2, "text_mixed_tiers", "tindle", "Tindle vaccine trial was cancelled after deaths")
            .page(CIVIC, "tindle-low", 99.0, Some(1), |p| {
                p.explicit("The Tindle trial continues and no deaths were reported, the sponsor said.")
            })
            .page(DAILY, "tindle-medium", 91.0, Some(1), |p| {
                p.implicit("Regulators reviewed the Tindle trial protocol last month as part of routine oversight.")
            })
            .page(WIRE, "tindle-high", 92.0, Some(2), |p| {
                p.explicit("Health authorities said the Tindle trial was never cancelled.")
            })
            .build(),
        Builder::new(3, "text_below_threshold", "ossory", "Ossory bridge will be demolished next week")
            .page(WIRE, "ossory-repairs", 85.0, Some(1), |p| {
                p.explicit("The Ossory bridge is scheduled for repairs, not demolition.")
            })
            .build(),
        Builder::new(4, "text_boundary", "kelvale", "Kelvale school closes permanently on Friday")
            .page(WIRE, "kelvale-at-threshold", 90.0, Some(1), |p| {
                p.explicit("Kelvale school will reopen on Monday after a planned maintenance day.")
            })
            .page(SCIENCE, "kelvale-below", 89.99, Some(1), |p| {
                p.explicit("The Kelvale district denied any plan to close the school.")
            })
            .build(),
        Builder::new(5, "text_after_cutoff", "brackwater", "Brackwater mayor arrested for fraud")
            .page(WIRE, "brackwater-later", 98.0, Some(-1), |p| {
                p.explicit("Police said the Brackwater mayor was never arrested.")
            })
            .page(METRO, "brackwater-earlier", 93.0, Some(2), |p| {
                p.implicit("The Brackwater mayor was questioned as a witness in an unrelated audit.")
            })
            .build(),
        Builder::new(6, "text_undated", "fernhollow", "Fernhollow water supply contains lead at toxic levels")
            .page(SCIENCE, "fernhollow-undated", 97.0, None, |p| {
                p.explicit("Tests of the Fernhollow water supply found lead far below the safety limit.")
            })
            .page(WIRE, "fernhollow-dated", 92.0, Some(4), |p| {
                p.explicit("The Fernhollow utility published test results showing safe lead levels.")
            })
            .build(),
        Builder::new(7, "text_unrated_publishers", "gravenmoor", "Gravenmoor factory leak poisoned the river")
            .out_of_scope(RUMOR, "gravenmoor-leak")
            .out_of_scope(FORUM, "gravenmoor-thread")
            .build(),
        Builder::new(8, "text_retry_numbered", "ashcombe", "Ashcombe hospital turned away all patients yesterday")
            .page(WIRE, "ashcombe-open", 96.0, Some(1), |p| {
                p.explicit("Ashcombe hospital said it treated patients as usual throughout the day.")
            })
            .page(METRO, "ashcombe-er", 91.0, Some(1), |p| {
                p.explicit("Only the Ashcombe outpatient clinic closed early because of staff training.")
            })
            .response(ResponseStyle::NumberedOnce)
            .build(),
        Builder::new(9, "text_rejected", "pellmere", "Pellmere elections were postponed indefinitely")
            .page(WIRE, "pellmere-vote", 95.0, Some(1), |p| {
                p.explicit("The Pellmere election commission confirmed the vote will go ahead on schedule.")
            })
            .response(ResponseStyle::AlwaysNumbered)
            .build(),
        Builder::new(10, "text_unsupported_url", "corriden", "Corriden zoo released all its lions")
            .page(SCIENCE, "corriden-lions", 94.0, Some(2), |p| {
                p.explicit("All Corriden zoo lions remain in their enclosure, keepers said.")
            })
            .response(ResponseStyle::ExtraUrl)
            .build(),
        Builder::new(11, "text_hallucinated_quote", "wyndle", "Wyndle airport shut down due to a gas leak")
            .page(WIRE, "wyndle-flights", 95.0, Some(1), |p| {
                p.implicit("Flights at Wyndle airport were delayed for an hour during a routine safety drill.")
                    .hallucinate("Wyndle airport officials denied that any gas leak took place.")
            })
            .build(),
        Builder::new(12, "text_queries_none", "thistlemoor", "thistlemoor lol")
            .page(WIRE, "thistlemoor", 95.0, Some(1), |p| p.explicit("Nothing happened in thistlemoor."))
            .queries_none()
            .build(),
        Builder::new(13, "text_fetch_failures", "harrowgate", "Harrowgate library burned down last night")
            .page(WIRE, "harrowgate-blocked", 99.0, Some(1), |p| {
                p.explicit("The Harrowgate library is undamaged.").failing()
            })
            .page(DAILY, "harrowgate-open", 93.0, Some(1), |p| {
                p.explicit("Harrowgate library staff said the building opened as usual this morning.")
            })
            .build(),
        Builder::new(14, "image_photo_visual", "lindqvist", "Look at the Lindqvist square protest today")
            .image(ImageSpec::photo(11, "a crowd holding signs in a city square"))
            .page(WIRE, "lindqvist-archive", 80.0, Some(1), |p| {
                p.explicit("The photo of the crowd was taken at a Lindqvist square concert in 2019.")
                    .image(111, 0.8)
            })
            .page(METRO, "lindqvist-other", 80.0, Some(1), |p| {
                p.explicit("Lindqvist square hosted a market on Saturday.").image(112, 0.5)
            })
            .build(),
        Builder::new(15, "image_multimodal_text", "orrington", "Orrington train derailed this morning")
            .image(ImageSpec::photo(12, "a train on tracks"))
            .page(WIRE, "orrington-on-time", 96.0, Some(1), |p| {
                p.explicit("Orrington rail services ran on time and no derailment occurred.")
            })
            .page(DAILY, "orrington-maint", 92.0, Some(1), |p| {
                p.explicit("The Orrington rail operator denied reports of an accident.")
            })
            .build(),
        Builder::new(16, "image_reverse_search", "saltcombe", "Saltcombe storm damage right now")
            .image(ImageSpec::photo(13, "a flooded street with cars"))
            .page(SCIENCE, "saltcombe-2017", 70.0, Some(30), |p| {
                p.explicit("This Saltcombe flood photo was first published in 2017.")
                    .image(113, 0.93)
                    .reverse_image_only()
            })
            .page(FORUM, "saltcombe-repost", 70.0, Some(3), |p| {
                p.explicit("Saltcombe photo repost.").image(114, 0.95).reverse_image_only()
            })
            .build(),
        Builder::new(17, "image_only_post", "veldmark", "")
            .image(ImageSpec::photo(14, "a veldmark warehouse on fire"))
            .page(WIRE, "veldmark-fire", 95.0, Some(1), |p| {
                p.implicit("The Veldmark warehouse fire was a controlled training exercise by firefighters.")
            })
            .build(),
        Builder::new(18, "image_celebrity_quote", "quorrin", "Can't believe Quorrin said this")
            .image(ImageSpec {
                seed: 15,
                caption: "a man speaking at a podium".into(),
                celebrities: vec!["Alex Quorrin".into()],
                ocr: "Taxes should be tripled for everyone".into(),
            })
            .page(METRO, "quorrin-speech", 96.0, Some(2), |p| {
                p.explicit("Alex Quorrin never said taxes should be tripled; the quote was fabricated.")
            })
            .build(),
        Builder::new(19, "text_long_page", "durnholm", "Durnholm mine collapse trapped 40 workers")
            .page(WIRE, "durnholm-report", 96.0, Some(1), |p| {
                p.explicit("No workers were trapped at the Durnholm mine, the operator said.")
                    .filler(long_filler())
            })
            .build(),
    ];
    debug_assert_eq!(list.len(), SCENARIO_COUNT);
    list
}

/// Neutral text well past the per-page character budget.
fn long_filler() -> String {
    "The regional safety board publishes quarterly inspection summaries for every site. ".repeat(320)
}

pub fn scenario(name: &str) -> Option<Scenario> {
    scenarios().into_iter().find(|s| s.name == name)
}
