#pragma once

// Brute-force unencrypted inverted index: replays the same query stream and
// yields ground-truth result sets. Set semantics: duplicate adds are
// idempotent, deleting an absent id is a no-op.

#include "fsse/common.hpp"

#include <map>
#include <set>
#include <string>

namespace fsse {

class PlaintextOracle {
public:
    void update(const std::string& keyword, DocId ind, Op op) {
        if (op == Op::Add)
            postings_[keyword].insert(ind);
        else
            postings_[keyword].erase(ind);
    }

    std::set<DocId> search(const std::string& keyword) const {
        auto it = postings_.find(keyword);
        return it == postings_.end() ? std::set<DocId>{} : it->second;
    }

    const std::map<std::string, std::set<DocId>>& postings() const { return postings_; }

private:
    std::map<std::string, std::set<DocId>> postings_;
};

}  // namespace fsse
