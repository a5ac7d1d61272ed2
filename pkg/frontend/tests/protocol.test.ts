// Validators against the shared fixtures in ../../protocol/fixtures.

import { readFileSync, readdirSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseEvent, validateCommand } from "../src/protocol.js";

const FIXTURES = fileURLToPath(new URL("../../protocol/fixtures/", import.meta.url));

function fixtureNames(prefix: string): string[] {
  return readdirSync(FIXTURES).filter((f) => f.startsWith(prefix));
}

function load(name: string): unknown {
  return JSON.parse(readFileSync(FIXTURES + name, "utf-8"));
}

describe("command validation", () => {
  it("accepts every command fixture", () => {
    const names = fixtureNames("command.");
    expect(names.length).toBeGreaterThanOrEqual(5);
    for (const name of names) {
      expect(validateCommand(load(name)), name).toBe(true);
    }
  });

  it("rejects mutated commands", () => {
    expect(validateCommand({ type: "set_gait", gait: 3 })).toBe(false);
    expect(validateCommand({ type: "set_gait" })).toBe(false);
    expect(validateCommand({ type: "set_scale", factor: 0 })).toBe(false);
    expect(validateCommand({ type: "warp" })).toBe(false);
    expect(validateCommand(null)).toBe(false);
    expect(validateCommand("set_gait")).toBe(false);
  });
});

describe("event parsing", () => {
  it("accepts every event fixture", () => {
    const names = fixtureNames("event.");
    expect(names.length).toBe(7);
    for (const name of names) {
      const parsed = parseEvent(JSON.stringify(load(name)));
      expect(parsed, name).not.toBeNull();
      expect(parsed!.type).toBe(name.split(".")[1]);
    }
  });

  it("rejects junk", () => {
    expect(parseEvent("not json")).toBeNull();
    expect(parseEvent("42")).toBeNull();
    expect(parseEvent('{"type":"mystery","seq":1}')).toBeNull();
    expect(parseEvent('{"type":"pose"}')).toBeNull(); // missing seq
  });
});
