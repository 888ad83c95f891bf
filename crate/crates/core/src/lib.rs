//! Analysis toolkit for passively collected IPv6 address corpora.
//!
//! The crate ingests timestamped address observations and answers the
//! questions a measurement study asks of them: what addressing patterns and
//! IID entropy do clients exhibit, which IIDs embed hardware MAC addresses,
//! which devices are trackable across prefixes and networks, which /64s are
//! aliased, and which embedded MACs can be linked to geolocated WiFi BSSIDs.
//! A synthetic corpus generator with planted ground truth backs end-to-end
//! testing, and a streaming store handles dedup beyond memory scale.
//!
//! All value types are immutable and the lookup tables freeze after
//! construction, so everything here is safe to share across worker threads.

pub mod addr;
pub mod backscan;
pub mod classify;
pub mod error;
pub mod eui64;
pub mod geolink;
pub mod pipeline;
pub mod prefix_map;
pub mod store;
pub mod synth;
pub mod tracking;

pub use addr::{Entropy, EntropyBand, Iid, Ip6, Prefix, parse_ipv6};
pub use classify::AddressCategory;
pub use error::{Error, Result};
pub use eui64::{Mac, Oui, OuiDb, embed_mac, extract_mac, is_apparent_eui64};
pub use prefix_map::{CountryCode, Ipv4Table, PrefixTable};
