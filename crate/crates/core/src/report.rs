//! Machine-readable explanation report.
//!
//! Serialized as JSON, one document per target user. Field names are
//! camelCase; `schemaVersion` is bumped on any incompatible change.
//!
//! ```text
//! schemaVersion          integer, currently 1
//! targetUser             external user id
//! coldUser               true when the user was unknown to the model
//! recommendedItems       [{item, predictedRating}]
//! reasonSimilarUsers     [{user, sim, isFriend, theirRatings: [{item, rating}]}]
//! reasonSimilarItems     [{recommendedItem, similarItems: [{item, sim, targetRating}]}]
//! metaUserExplanations   [{user, commonFriends: [user],
//!                          commonFavorites: [{item, targetRating, otherRating}],
//!                          commonDislikes:  [{item, targetRating, otherRating}]}]
//! metaItemExplanations   [{recommendedItem, similarItem,
//!                          commonAdmirers: [{user, recommendedRating, similarRating}]}]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationReport {
    pub schema_version: u32,
    pub target_user: String,
    pub cold_user: bool,
    pub recommended_items: Vec<RecommendedItem>,
    pub reason_similar_users: Vec<SimilarUser>,
    pub reason_similar_items: Vec<SimilarItemsFor>,
    pub meta_user_explanations: Vec<UserMeta>,
    pub meta_item_explanations: Vec<ItemMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecommendedItem {
    pub item: String,
    pub predicted_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ItemRating {
    pub item: String,
    pub rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarUser {
    pub user: String,
    pub sim: f64,
    pub is_friend: bool,
    /// Ratings this user gave to the recommended items.
    pub their_ratings: Vec<ItemRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarItem {
    pub item: String,
    pub sim: f64,
    pub target_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarItemsFor {
    pub recommended_item: String,
    pub similar_items: Vec<SimilarItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SharedRating {
    pub item: String,
    pub target_rating: f64,
    pub other_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UserMeta {
    pub user: String,
    pub common_friends: Vec<String>,
    pub common_favorites: Vec<SharedRating>,
    pub common_dislikes: Vec<SharedRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Admirer {
    pub user: String,
    pub recommended_rating: f64,
    pub similar_rating: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ItemMeta {
    pub recommended_item: String,
    pub similar_item: String,
    pub common_admirers: Vec<Admirer>,
}

impl ExplanationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report schema {} is not supported (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }
}
