#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <expat.h>

#include "error.hpp"
#include "text.hpp"

namespace ctmatch::xml {

/// Element tree node. Text holds the concatenated character data of this
/// element only, not of its descendants.
struct element {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::string text;
    std::vector<element> children;

    const element* child(std::string_view child_name) const
    {
        for (const auto& c : children) {
            if (c.name == child_name) {
                return &c;
            }
        }
        return nullptr;
    }

    std::string attribute(std::string_view key) const
    {
        for (const auto& [k, v] : attributes) {
            if (k == key) {
                return v;
            }
        }
        return {};
    }

    /// All elements reached by a '/'-separated path of child names.
    std::vector<const element*> select(std::string_view path) const
    {
        std::vector<const element*> current{this};
        for (auto step : split_on(path, '/')) {
            std::vector<const element*> next;
            for (const auto* e : current) {
                for (const auto& c : e->children) {
                    if (c.name == step) {
                        next.push_back(&c);
                    }
                }
            }
            current = std::move(next);
        }
        return current;
    }

    /// Text of this element and all descendants in document order.
    std::string deep_text() const
    {
        std::string out = text;
        for (const auto& c : children) {
            out += c.deep_text();
        }
        return out;
    }
};

namespace detail {

    struct builder {
        std::vector<element> stack;
        element root;
        bool done = false;

        static void on_start(void* ud, const XML_Char* name, const XML_Char** attrs)
        {
            auto* self = static_cast<builder*>(ud);
            element e;
            e.name = name;
            for (std::size_t i = 0; attrs[i] != nullptr; i += 2) {
                e.attributes.emplace_back(attrs[i], attrs[i + 1]);
            }
            self->stack.push_back(std::move(e));
        }

        static void on_end(void* ud, const XML_Char*)
        {
            auto* self = static_cast<builder*>(ud);
            element e = std::move(self->stack.back());
            self->stack.pop_back();
            if (self->stack.empty()) {
                self->root = std::move(e);
                self->done = true;
            } else {
                self->stack.back().children.push_back(std::move(e));
            }
        }

        static void on_text(void* ud, const XML_Char* s, int len)
        {
            auto* self = static_cast<builder*>(ud);
            if (!self->stack.empty()) {
                self->stack.back().text.append(s, static_cast<std::size_t>(len));
            }
        }
    };

    struct parser_deleter {
        void operator()(XML_Parser p) const { XML_ParserFree(p); }
    };

    /// Parses one document starting at `data`. Returns the root and the number
    /// of bytes consumed; trailing content after the root element is left for
    /// the caller.
    inline std::pair<element, std::size_t> parse_one(std::string_view data, std::size_t base)
    {
        std::unique_ptr<XML_ParserStruct, parser_deleter> parser(XML_ParserCreate("UTF-8"));
        builder b;
        XML_SetUserData(parser.get(), &b);
        XML_SetElementHandler(parser.get(), &builder::on_start, &builder::on_end);
        XML_SetCharacterDataHandler(parser.get(), &builder::on_text);
        auto status = XML_Parse(parser.get(), data.data(), static_cast<int>(data.size()), 1);
        if (status == XML_STATUS_OK) {
            return {std::move(b.root), data.size()};
        }
        auto code = XML_GetErrorCode(parser.get());
        auto at = static_cast<std::size_t>(XML_GetCurrentByteIndex(parser.get()));
        if (b.done
            && (code == XML_ERROR_JUNK_AFTER_DOC_ELEMENT || code == XML_ERROR_MISPLACED_XML_PI)) {
            return {std::move(b.root), at};
        }
        throw parse_error(std::string("malformed XML: ") + XML_ErrorString(code), base + at);
    }

}  // namespace detail

/// Parses a single XML document. Content after the root element is an error.
inline element parse(std::string_view data)
{
    auto [root, used] = detail::parse_one(data, 0);
    if (!trim(data.substr(used)).empty()) {
        throw parse_error("content after document element", used);
    }
    return std::move(root);
}

/// Parses a stream of concatenated XML documents, each optionally preceded by
/// its own XML declaration.
inline std::vector<element> parse_many(std::string_view data)
{
    std::vector<element> out;
    std::size_t pos = 0;
    while (pos < data.size()) {
        while (pos < data.size() && is_space(data[pos])) {
            ++pos;
        }
        if (pos == data.size()) {
            break;
        }
        auto [root, used] = detail::parse_one(data.substr(pos), pos);
        out.push_back(std::move(root));
        pos += used;
    }
    return out;
}

}  // namespace ctmatch::xml
