#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "chorus/core/decision.hpp"
#include "chorus/core/text.hpp"
#include "chorus/core/transcript.hpp"
#include "test_support.hpp"

using namespace chorus;
using chorus::testing::message;
using chorus::testing::simple;

namespace {

ChatEvent reaction(const std::string& who, Seq target, const std::string& emoji) {
    ChatEvent e = simple(who, EventKind::reaction);
    e.thread_of = target;
    e.emoji = emoji;
    return e;
}

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("chorus_core_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    auto p = dir / name;
    std::filesystem::remove(p);
    return p;
}

}  // namespace

TEST(ChatEventJson, RoundTripKeepsEveryField) {
    ChatEvent e = message("Ana", "hello \"there\"\nsecond line", 3);
    e.seq = 7;
    e.ts_ms = 1234;
    e.room = "r";
    e.payload = Json{{"trigger_seqs", {3}}, {"placement", "thread"}};
    EXPECT_EQ(event_from_json(to_json(e)), e);
    EXPECT_EQ(event_from_jsonl(to_jsonl(e)), e);
}

TEST(ChatEventJson, FieldOrderIsStable) {
    ChatEvent e = message("Ana", "hi");
    e.seq = 1;
    e.ts_ms = 5;
    e.room = "r";
    EXPECT_EQ(to_jsonl(e), R"({"seq":1,"ts_ms":5,"room":"r","author":"Ana","kind":"message","text":"hi"})");
}

TEST(ChatEventJson, RejectsUnknownFieldsAndWrongTypes) {
    EXPECT_THROW(event_from_jsonl(R"({"seq":1,"ts_ms":5,"room":"r","author":"A","kind":"join","extra":1})"), InvalidEvent);
    EXPECT_THROW(event_from_jsonl(R"({"seq":"1","ts_ms":5,"room":"r","author":"A","kind":"join"})"), InvalidEvent);
    EXPECT_THROW(event_from_jsonl(R"({"seq":1,"ts_ms":5,"room":"r","author":"A","kind":"shout"})"), InvalidEvent);
    EXPECT_THROW(event_from_jsonl(R"({"seq":1,"ts_ms":5,"room":"r","kind":"join"})"), InvalidEvent);
    EXPECT_THROW(event_from_jsonl("not json"), InvalidEvent);
    EXPECT_THROW(event_from_jsonl("[1,2]"), InvalidEvent);
}

TEST(ChatEventJson, EveryKindNameRoundTrips) {
    for (auto k : {EventKind::message, EventKind::reaction, EventKind::typing_start, EventKind::typing_stop,
                   EventKind::join, EventKind::leave, EventKind::settings_change, EventKind::proposal,
                   EventKind::vote}) {
        EXPECT_EQ(event_kind_from_string(to_string(k)), k);
    }
    EXPECT_FALSE(event_kind_from_string("typing"));
}

TEST(EventShape, MessageNeedsText) {
    EXPECT_THROW(validate_event_shape(simple("Ana", EventKind::message)), InvalidEvent);
    EXPECT_THROW(validate_event_shape(message("Ana", "")), InvalidEvent);
    EXPECT_NO_THROW(validate_event_shape(message("Ana", "x")));
}

TEST(EventShape, ReactionNeedsEmojiAndTarget) {
    auto r = simple("Ana", EventKind::reaction);
    EXPECT_THROW(validate_event_shape(r), InvalidEvent);
    r.emoji = "smile";
    EXPECT_THROW(validate_event_shape(r), InvalidEvent);
    r.thread_of = 1;
    EXPECT_NO_THROW(validate_event_shape(r));
}

TEST(EventShape, AuthorMustBeOneLine) {
    EXPECT_THROW(validate_event_shape(message("", "x")), InvalidEvent);
    EXPECT_THROW(validate_event_shape(message("A\nB", "x")), InvalidEvent);
    EXPECT_TRUE(is_valid_name("[User 1]"));
}

TEST(TranscriptTest, SeqsAreContiguousFromOne) {
    Transcript t("r");
    for (int i = 0; i < 5; ++i) {
        auto draft = message("Ana", "m" + std::to_string(i));
        draft.seq = 99;  // ignored
        EXPECT_EQ(t.append(draft).seq, i + 1);
    }
    EXPECT_EQ(t.last_seq(), 5);
    EXPECT_EQ(t.size(), 5u);
    EXPECT_EQ(t.find(3)->text, "m2");
    EXPECT_FALSE(t.find(6));
}

TEST(TranscriptTest, FillsRoomAndRejectsForeignRoom) {
    Transcript t("r");
    EXPECT_EQ(t.append(message("Ana", "x")).room, "r");
    auto other = message("Ana", "x");
    other.room = "s";
    EXPECT_THROW(t.append(other), InvalidEvent);
    EXPECT_EQ(t.size(), 1u);
}

TEST(TranscriptTest, UnknownParentLeavesLogUnchanged) {
    Transcript t("r");
    t.append(message("Ana", "root"));
    t.append(simple("Ben", EventKind::join));
    EXPECT_THROW(t.append(message("Ben", "reply", 5)), InvalidEvent);
    EXPECT_THROW(t.append(message("Ben", "reply", 2)), InvalidEvent);  // parent is not a message
    EXPECT_THROW(t.append(reaction("Ben", 9, "smile")), InvalidEvent);
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.append(message("Ben", "reply", 1)).seq, 3);
}

// Reference implementation: filter to message/reaction with seq <= upto,
// keep the last n.
std::vector<ChatEvent> window_oracle(const std::vector<ChatEvent>& all, std::size_t n, std::optional<Seq> upto) {
    std::vector<ChatEvent> kept;
    for (const auto& e : all) {
        if (upto && e.seq > *upto) continue;
        if (e.kind == EventKind::message || e.kind == EventKind::reaction) kept.push_back(e);
    }
    if (kept.size() > n) kept.erase(kept.begin(), kept.end() - static_cast<std::ptrdiff_t>(n));
    return kept;
}

TEST(TranscriptTest, ContextWindowMatchesOracle) {
    std::mt19937 rng(7);
    Transcript t("r");
    for (int i = 0; i < 200; ++i) {
        switch (rng() % 4) {
            case 0: t.append(simple("Ana", EventKind::typing_start)); break;
            case 1:
                if (t.size() > 0 && t.find(1)->kind == EventKind::message) {
                    t.append(reaction("Ben", 1, "smile"));
                    break;
                }
                [[fallthrough]];
            default: t.append(message("Ana", "m" + std::to_string(i))); break;
        }
    }
    const auto all = t.snapshot();
    for (std::size_t n : {1u, 2u, 5u, 50u, 500u}) {
        EXPECT_EQ(t.context_window(n), window_oracle(all, n, std::nullopt)) << n;
        for (Seq upto : {-1, 0, 1, 2, 17, 100, 199, 200, 250}) {
            EXPECT_EQ(t.context_window(n, upto), window_oracle(all, n, upto)) << n << " upto " << upto;
        }
    }
    EXPECT_THROW(t.context_window(0), std::invalid_argument);
}

TEST(TranscriptTest, ContextWindowOnEmptyRoom) {
    Transcript t("r");
    EXPECT_TRUE(t.context_window(10).empty());
}

TEST(TranscriptTest, ReopenRestoresEvents) {
    const auto path = temp_path("reopen.jsonl");
    {
        auto t = Transcript::open("r", path);
        t->append(message("Ana", "one"));
        t->append(message("Ben", "two", 1));
    }
    auto t = Transcript::open("r", path);
    ASSERT_EQ(t->size(), 2u);
    EXPECT_EQ(t->find(2)->thread_of, 1);
    EXPECT_EQ(t->append(message("Ana", "three")).seq, 3);
    EXPECT_EQ(read_jsonl_events(path).size(), 3u);
}

TEST(TranscriptTest, OpenRejectsGapsAndForeignRooms) {
    const auto path = temp_path("gap.jsonl");
    {
        std::ofstream out(path);
        out << R"({"seq":1,"ts_ms":0,"room":"r","author":"A","kind":"join"})" << "\n";
        out << R"({"seq":3,"ts_ms":0,"room":"r","author":"A","kind":"join"})" << "\n";
    }
    EXPECT_THROW(Transcript::open("r", path), InvalidEvent);
    EXPECT_THROW(Transcript::open("other", path), InvalidEvent);
}

TEST(Jsonl, ErrorsNameTheLine) {
    const std::string text =
        R"({"seq":1,"ts_ms":0,"room":"r","author":"A","kind":"join"})"
        "\n\n"
        R"({"seq":2,"ts_ms":0,"room":"r","author":"A","kind":"message"})"
        "\n";
    try {
        parse_jsonl_events(text);
        FAIL() << "expected InvalidEvent";
    } catch (const InvalidEvent& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Jsonl, WriteThenReadIsIdentity) {
    Transcript t("r");
    t.append(message("Ana", "é ünïcode ✓"));
    t.append(reaction("Ben", 1, "heart"));
    const auto path = temp_path("rt.jsonl");
    write_jsonl_events(path, t.snapshot());
    EXPECT_EQ(read_jsonl_events(path), t.snapshot());
    EXPECT_EQ(to_jsonl(parse_jsonl_events(to_jsonl(t.snapshot()))), to_jsonl(t.snapshot()));
}

TEST(TranscriptStoreTest, RoomsAreIndependent) {
    TranscriptStore store;
    store.create_room("a");
    store.create_room("b");
    EXPECT_EQ(store.append_event("a", message("Ana", "x")).seq, 1);
    EXPECT_EQ(store.append_event("b", message("Ana", "y")).seq, 1);
    EXPECT_EQ(store.append_event("a", message("Ana", "z")).seq, 2);
    EXPECT_THROW(store.append_event("c", message("Ana", "x")), UnknownRoom);
    EXPECT_EQ(store.context_window("b", 10).size(), 1u);
    EXPECT_TRUE(store.has_room("a"));
    EXPECT_FALSE(store.has_room("c"));
}

TEST(Text, WholeWordMatching) {
    EXPECT_EQ(find_whole_word("hey koala, hi", "Koala"), 4u);
    EXPECT_EQ(find_whole_word("@Koala hi", "koala"), 1u);
    EXPECT_FALSE(find_whole_word("Koalas are cute", "Koala"));
    EXPECT_FALSE(find_whole_word("myKoala", "Koala"));
    EXPECT_EQ(find_whole_word("Koalas and Koala", "Koala"), 11u);
    EXPECT_FALSE(find_whole_word("Koalaé", "Koala"));
    EXPECT_EQ(find_whole_word("Koala.", "Koala"), 0u);
}

TEST(Text, Utf8Counting) {
    EXPECT_EQ(utf8_length(""), 0u);
    EXPECT_EQ(utf8_length("abc"), 3u);
    EXPECT_EQ(utf8_length("é✓"), 2u);
    EXPECT_EQ(utf8_offset("é✓x", 1), 2u);
    EXPECT_EQ(utf8_offset("é✓x", 2), 5u);
    EXPECT_EQ(utf8_offset("ab", 10), 2u);
    EXPECT_EQ(trim("  a b \n"), "a b");
}

TEST(ReactionTokens, NamesRoundTrip) {
    for (auto t : all_reaction_tokens()) EXPECT_EQ(token_from_name(token_name(t)), t);
    EXPECT_EQ(token_from_name("THUMBS UP"), ReactionToken::THUMBS_UP);
    EXPECT_FALSE(token_from_name("like"));
    EXPECT_EQ(all_reaction_tokens().size(), 10u);
}

TEST(DecisionShape, WellFormedness) {
    AgentDecision d{"Ana", "all", "hi", 80, Verdict::SUBMIT, std::nullopt};
    EXPECT_TRUE(is_well_formed(d));
    d.value = 101;
    EXPECT_FALSE(is_well_formed(d));
    d.value = -1;
    EXPECT_FALSE(is_well_formed(d));
    d.value = 50;
    d.reply.clear();
    EXPECT_FALSE(is_well_formed(d));
    d.reaction = ReactionToken::LIKE;
    EXPECT_TRUE(is_well_formed(d));
    d.verdict = Verdict::PASS;
    d.reaction.reset();
    EXPECT_TRUE(is_well_formed(d));
}
