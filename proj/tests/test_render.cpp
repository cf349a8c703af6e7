#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "npcsh/error.hpp"
#include "npcsh/render.hpp"

using namespace npcsh;

TEST_CASE("hand-traced threading: prior step value splices into the next body") {
    // The worked example: step1 produced "a", the next body is "{{ step1 }}-x".
    Bindings b{{"step1", Value("a")}};
    CHECK(render_template("{{ step1 }}-x", b) == "a-x");
}

TEST_CASE("bare identifiers and whitespace variants") {
    Bindings b{{"name", Value("ada")}, {"n", Value(3)}};
    CHECK(render_template("hi {{ name }}", b) == "hi ada");
    CHECK(render_template("hi {{name}}", b) == "hi ada");
    CHECK(render_template("hi {{  name\t}}", b) == "hi ada");
    CHECK(render_template("{{ n }} items", b) == "3 items");
    CHECK(render_template("no holes here", b) == "no holes here");
    CHECK(render_template("", b).empty());
}

TEST_CASE("values render as text, not as quoted JSON") {
    Bindings b{
        {"s", Value("plain")},
        {"i", Value(42)},
        {"f", Value(2.5)},
        {"t", Value(true)},
        {"arr", Value::parse(R"([1, "two"])")},
        {"obj", Value::parse(R"({"k": 1})")},
    };
    CHECK(render_template("{{ s }}", b) == "plain");       // no quotes
    CHECK(render_template("{{ i }}", b) == "42");
    CHECK(render_template("{{ f }}", b) == "2.5");
    CHECK(render_template("{{ t }}", b) == "true");
    CHECK(render_template("{{ arr }}", b) == R"([1,"two"])");
    CHECK(render_template("{{ obj }}", b) == R"({"k":1})");
}

TEST_CASE("dotted paths traverse object values") {
    Bindings b{{"result", Value::parse(R"({"user": {"id": 7, "name": "kim"}})")}};
    CHECK(render_template("{{ result.user.id }}", b) == "7");
    CHECK(render_template("{{ result.user.name }}", b) == "kim");
}

TEST_CASE("dotted access into a string parses its final line as JSON") {
    // A shell step printed a log and then a structured payload; dotted paths
    // see the payload.
    Bindings b{{"fetch", Value("downloading...\ndone\n{\"status\": 200, \"body\": \"ok\"}")}};
    CHECK(render_template("{{ fetch.status }}", b) == "200");
    CHECK(render_template("{{ fetch.body }}", b) == "ok");
    // Bare reference still yields the whole string.
    CHECK(render_template("{{ fetch }}", b) ==
          "downloading...\ndone\n{\"status\": 200, \"body\": \"ok\"}");

    // Trailing whitespace after the payload does not break the view.
    Bindings c{{"out", Value("{\"x\": 1}\n  \n")}};
    CHECK(render_template("{{ out.x }}", c) == "1");
}

TEST_CASE("dotted access errors") {
    Bindings b{
        {"num", Value(5)},
        {"text", Value("just words")},
        {"obj", Value::parse(R"({"a": 1})")},
    };
    CHECK_THROWS_AS(render_template("{{ missing }}", b), Error);
    try {
        render_template("{{ missing }}", b);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnboundVariable);
    }
    try {
        render_template("{{ num.field }}", b);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BadPath);
    }
    try {
        render_template("{{ text.field }}", b);  // last line is not a JSON object
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BadPath);
    }
    try {
        render_template("{{ obj.b }}", b);  // missing key
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BadPath);
    }
}

TEST_CASE("non-dialect braces pass through verbatim") {
    Bindings b{{"x", Value(1)}};
    // Jinja-style filters and expressions are not this dialect.
    CHECK(render_template("{{ x | upper }}", b) == "{{ x | upper }}");
    CHECK(render_template("{{ 1 + 2 }}", b) == "{{ 1 + 2 }}");
    CHECK(render_template("{{ a b }}", b) == "{{ a b }}");
    CHECK(render_template("{{ .lead }}", b) == "{{ .lead }}");
    CHECK(render_template("{{ trail. }}", b) == "{{ trail. }}");
    CHECK(render_template("{{ two..dots }}", b) == "{{ two..dots }}");
    CHECK(render_template("{{}}", b) == "{{}}");
    // Unterminated opener is literal.
    CHECK(render_template("{{ x", b) == "{{ x");
    // Single braces are never holes.
    CHECK(render_template("{x} {\"json\": 1}", b) == "{x} {\"json\": 1}");
    // A literal hole and a real hole can coexist.
    CHECK(render_template("{{ x }} and {{ x|y }}", b) == "1 and {{ x|y }}");
}

TEST_CASE("shell and JSON bodies keep their braces") {
    Bindings b{{"path", Value("/tmp/f")}};
    CHECK(render_template("awk '{print $1}' {{ path }}", b) == "awk '{print $1}' /tmp/f");
    CHECK(render_template(R"(echo '{"k": "{{ path }}"}')", b) ==
          R"(echo '{"k": "/tmp/f"}')");
}

TEST_CASE("has_template_holes ignores non-dialect braces") {
    CHECK(has_template_holes("{{ a }}"));
    CHECK(has_template_holes("x {{ a.b }} y"));
    CHECK_FALSE(has_template_holes("plain"));
    CHECK_FALSE(has_template_holes("{{ 1 + 2 }}"));
    CHECK_FALSE(has_template_holes("{{ open"));
    CHECK(has_template_holes("{{ 1 + 2 }} {{ real }}"));
}

TEST_CASE("template_roots lists first appearances in order") {
    auto roots = template_roots("{{ b.x }} {{ a }} {{ b.y }} {{ c }} {{ a }}");
    REQUIRE(roots.size() == 3);
    CHECK(roots[0] == "b");
    CHECK(roots[1] == "a");
    CHECK(roots[2] == "c");
    CHECK(template_roots("{{ not valid }}").empty());
}

TEST_CASE("render trace records each substitution") {
    Bindings b{{"a", Value("1")}, {"b", Value("2")}};
    RenderTrace trace;
    render_template("{{ a }}+{{ b }}={{ a }}", b, &trace);
    REQUIRE(trace.events.size() == 3);
    CHECK(trace.events[0].expression == "a");
    CHECK(trace.events[0].replacement == "1");
    CHECK(trace.events[1].expression == "b");
    CHECK(trace.events[2].expression == "a");
}
