#include "thoughtgraph/dataset.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/log.hpp"
#include "thoughtgraph/text.hpp"

#include <set>

namespace tgraph {

std::vector<std::string> parse_gene_list(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t' || c == ';') flush();
        else cur.push_back(c);
    }
    flush();
    return out;
}

std::vector<GeneSetRecord> parse_dataset(std::string_view content) {
    std::vector<GeneSetRecord> out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    bool header = true;
    for (auto& raw : text::split(content, '\n')) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (header) {
            header = false;
            auto cols = text::split(raw, '\t');
            if (cols.size() < 3 || text::trim(cols[0]) != "go_id")
                throw ParseError("dataset header must start with go_id<TAB>term_name<TAB>gene_symbols", line_no);
            continue;
        }
        if (text::trim(raw).empty()) continue;
        auto cols = text::split(raw, '\t');
        if (cols.size() < 3 || cols.size() > 4) throw ParseError("dataset row needs 3 or 4 tab-separated columns", line_no);

        GeneSetRecord r;
        r.id = text::trim(cols[0]);
        if (r.id.empty()) throw ParseError("dataset row without go_id", line_no);
        if (!ids.insert(r.id).second) throw ParseError("duplicate go_id " + r.id, line_no);
        r.ground_truth_go_id = r.id;
        auto name = text::trim(cols[1]);
        if (name.empty()) throw ParseError("dataset row without term_name", line_no);
        r.ground_truth_name = name;
        r.genes = parse_gene_list(cols[2]);
        if (cols.size() == 4 && !text::trim(cols[3]).empty()) r.description = text::trim(cols[3]);
        try {
            validate(r);
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line_no);
        }
        out.push_back(std::move(r));
    }
    if (header) throw ParseError("dataset is empty (no header line)");
    if (out.empty()) log::warning("dataset has a header but no rows");
    return out;
}

std::vector<GeneSetRecord> ingest_dataset(const std::string& path) { return parse_dataset(text::read_file(path)); }

const GeneSetRecord* find_record(const std::vector<GeneSetRecord>& records, std::string_view id) {
    for (const auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

} // namespace tgraph
