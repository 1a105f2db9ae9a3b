#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "codkit/textcore.hpp"

namespace codkit {

enum class EntityCategory { PersonLike, OrgLocLike, Numeric, DateLike, Money, Other };

std::string_view to_string(EntityCategory category);

struct Entity {
    std::string surface;
    EntityCategory category = EntityCategory::Other;
    /// First occurrence in the normalized source; absent for sidecar entities
    /// that do not occur verbatim in the summary.
    std::optional<Span> first_span;
};

/// Entities unique by case-folded surface form; insertion order is kept.
class EntitySet {
public:
    /// Returns false (and keeps the existing entry) when the key is taken.
    bool insert(Entity entity);

    bool contains(std::string_view surface) const;
    std::size_t size() const { return entities_.size(); }
    bool empty() const { return entities_.empty(); }

    auto begin() const { return entities_.begin(); }
    auto end() const { return entities_.end(); }
    const std::vector<Entity>& entities() const { return entities_; }

private:
    std::vector<Entity> entities_;
    std::unordered_set<std::string> keys_;
};

/// Term list for rule (4) of the extractor. Lookups are case-folded; a term
/// may span several tokens ("Premier League").
class Gazetteer {
public:
    Gazetteer() = default;

    /// Weekday and month names, tagged DATE_LIKE.
    static const Gazetteer& defaults();

    /// One term per line, optionally followed by a TAB and a category name
    /// (PERSON_LIKE, ORG_LOC_LIKE, NUMERIC, DATE_LIKE, MONEY, OTHER).
    static Gazetteer from_file(const std::filesystem::path& path);

    void add(std::string_view term, EntityCategory category);
    void merge(const Gazetteer& other);
    std::optional<EntityCategory> lookup(std::string_view term) const;
    std::size_t size() const { return terms_.size(); }

private:
    std::unordered_map<std::string, EntityCategory> terms_;
};

struct ExtractorConfig {
    AbbreviationList abbreviations = AbbreviationList::defaults();
    Gazetteer gazetteer = Gazetteer::defaults();
};

/// Rule-cascade entity extraction:
///   1. maximal runs of capitalized tokens; a sentence-initial token joins
///      only if it is a gazetteer term, recurs capitalized mid-sentence, or
///      is not a common function word and never appears lowercased;
///   2. tokens containing digits;
///   3. currency-prefixed tokens;
///   4. gazetteer terms.
EntitySet extract_entities(std::string_view text, const ExtractorConfig& config = {});

struct DensityRecord {
    std::size_t token_count = 0;
    std::size_t entity_count = 0;
    double density = 0.0;
};

/// Throws DegenerateInput when token_count is zero or the entity count
/// exceeds it.
DensityRecord make_density_record(std::size_t token_count, std::size_t entity_count);

DensityRecord entity_density(std::string_view summary, const EntitySet& entities,
                             const AbbreviationList& abbreviations = AbbreviationList::defaults());

/// Mean of per-summary densities (not total entities over total tokens).
double corpus_density(std::span<const DensityRecord> records);

/// Reads a JSONL sidecar of {"summary_id": ..., "entities": [...]} rows.
/// `summaries` maps every known summary id to its text; a row naming an
/// unknown id, or a malformed row, throws RowError.
std::map<std::string, EntitySet> load_entity_sidecar(
    const std::filesystem::path& path, const std::map<std::string, std::string>& summaries);

}  // namespace codkit
