import { describe, expect, it } from "vitest";

import { CaptionModel } from "../src/captions.js";

describe("CaptionModel", () => {
  it("starts empty; lines come only from appends", () => {
    expect(new CaptionModel().lines).toEqual([]);
  });

  it("keeps user and agent lines in arrival order", () => {
    const model = new CaptionModel();
    model.appendUser("How long is the video?");
    model.appendAgent("This video is 4 minutes long.");
    model.appendUser("Repeat that");
    model.appendAgent("This video is 4 minutes long.");
    expect(model.lines.map((l) => l.speaker)).toEqual(["user", "agent", "user", "agent"]);
    expect(model.lines[1]!.text).toBe("This video is 4 minutes long.");
  });

  it("drops empty text instead of adding blank lines", () => {
    const model = new CaptionModel();
    model.appendAgent("");
    model.appendAgent("   ");
    model.appendUser("");
    expect(model.lines).toHaveLength(0);
  });

  it("mirrors fontMagnification into captionScale", () => {
    const model = new CaptionModel();
    expect(model.captionScale).toBe(1.0);
    model.applySettings({ fontMagnification: 1.5 });
    expect(model.captionScale).toBe(1.5);
  });
});
