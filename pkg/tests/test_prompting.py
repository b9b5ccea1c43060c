from __future__ import annotations

import pytest

from apitrail.prompting import ROLES, load_template, render


class TestTemplates:
    def test_all_roles_ship_as_package_data(self):
        for role in ROLES:
            text = load_template(role)
            assert text.strip()

    def test_unknown_role_rejected(self):
        with pytest.raises(ValueError):
            load_template("nonexistent_role")

    def test_override_directory_wins(self, tmp_path):
        (tmp_path / "plan.txt").write_text("custom {problem}", encoding="utf-8")
        assert load_template("plan", tmp_path) == "custom {problem}"
        # roles without an override fall back to the packaged template
        assert "LIBRARY OVERVIEW" in load_template("summarize", tmp_path)


class TestRender:
    def test_substitutes_known_placeholders(self):
        assert render("a {x} b {y}", x="1", y="2") == "a 1 b 2"

    def test_unknown_placeholders_left_alone(self):
        assert render("keep {unknown} here", x="1") == "keep {unknown} here"

    def test_braces_in_values_not_reinterpreted(self):
        code = "d = {'k': 1}\nprint(f'{d}')"
        out = render("CODE:\n{code}\nEND {code_context}", code=code)
        assert code in out
        assert "{code_context}" in out
