// @vitest-environment jsdom

import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { CuratorFlow } from "../src/flow.js";
import { bindKeyboard, isTypingTarget, renderApp } from "../src/view.js";
import { FakeServer, VOCAB, makeDetail } from "./fakeServer.js";
import type { FrameDetail } from "../src/types.js";

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
});

async function mount(details?: FrameDetail[]) {
  const server = new FakeServer(
    details ?? [makeDetail("frame_0000"), makeDetail("frame_0001")],
  );
  const client = new ApiClient("", server.fetch);
  const flow = new CuratorFlow(client, VOCAB, "tester");
  flow.subscribe(() => renderApp(root, flow));
  await flow.loadList();
  await flow.openNextUnverified();
  return { server, client, flow };
}

function byTestId<T extends HTMLElement>(testId: string): T {
  const node = root.querySelector(`[data-testid="${testId}"]`);
  if (!node) throw new Error(`missing [data-testid="${testId}"]`);
  return node as T;
}

describe("curator view", () => {
  it("renders one dropdown per enum field with the vocabulary as options", async () => {
    const { flow } = await mount();
    for (const { field } of flow.form!.enumFields()) {
      if (flow.form!.isListField(field)) continue;
      const select = byTestId<HTMLSelectElement>(`field-${field}`);
      const options = [...select.options].map((o) => o.value);
      expect(options).toEqual(VOCAB.fields[field]);
      expect(select.value).toBe(flow.form!.value(field));
    }
    expect(byTestId<HTMLSelectElement>("field-weather").value).toBe("clear");
  });

  it("renders list fields, tags, risk, and description pre-filled", async () => {
    await mount();
    const controls = byTestId("field-traffic_controls");
    const checked = [...controls.querySelectorAll<HTMLInputElement>("input")]
      .filter((i) => i.checked)
      .map((i) => i.value);
    expect(checked).toEqual(["none"]);

    expect(byTestId<HTMLInputElement>("tag-construction").checked).toBe(true);
    expect(byTestId<HTMLInputElement>("tag-vru_hazard").checked).toBe(false);
    expect(byTestId<HTMLInputElement>("risk-input").value).toBe("3");
    expect(byTestId<HTMLTextAreaElement>("description-input").value).toContain(
      "Construction zone",
    );
    expect(byTestId("inventory").textContent).toContain("[VERIFIED SCENE INVENTORY]");
  });

  it("routes dropdown edits into the form state", async () => {
    const { flow } = await mount();
    const select = byTestId<HTMLSelectElement>("field-weather");
    select.value = "rain";
    select.dispatchEvent(new Event("change", { bubbles: true }));
    expect(flow.form!.value("weather")).toBe("rain");
    // The re-render keeps the new value selected.
    expect(byTestId<HTMLSelectElement>("field-weather").value).toBe("rain");
  });

  it("routes tag and risk edits into the form state", async () => {
    const { flow } = await mount();
    const tag = byTestId<HTMLInputElement>("tag-vru_hazard");
    tag.checked = true;
    tag.dispatchEvent(new Event("change", { bubbles: true }));
    expect(flow.form!.tags).toEqual(["construction", "vru_hazard"]);

    const risk = byTestId<HTMLInputElement>("risk-input");
    risk.value = "8";
    risk.dispatchEvent(new Event("input", { bubbles: true }));
    expect(flow.form!.risk).toBe(8);
  });

  it("disables save and shows the violation when the form is invalid", async () => {
    const { flow } = await mount();
    flow.form!.setField("weather", "drizzle");
    renderApp(root, flow);

    expect(byTestId<HTMLButtonElement>("save").disabled).toBe(true);
    expect(byTestId<HTMLButtonElement>("accept").disabled).toBe(true);
    expect(byTestId("violation-odd_attributes.weather").textContent).toContain("vocabulary");
    // The bogus value is still visible rather than silently snapping back.
    const select = byTestId<HTMLSelectElement>("field-weather");
    expect(select.selectedOptions[0]?.textContent).toBe("drizzle (invalid)");
  });

  it("renders a forced 422 from the server next to the field", async () => {
    const { flow, server } = await mount();
    flow.form!.setField("weather", "drizzle");
    await flow.submit({ force: true });

    expect(server.gold.size).toBe(0);
    expect(byTestId("violation-odd_attributes.weather").textContent).toBe(
      "weather vocabulary (got 'drizzle')",
    );
    expect(byTestId("notice").textContent).toContain("the server rejected the label");
  });

  it("accept button verifies the frame and advances the view", async () => {
    const { server } = await mount();
    byTestId<HTMLButtonElement>("accept").click();

    await vi.waitFor(() => {
      expect(byTestId("progress").textContent).toBe("1/2 verified");
      expect(byTestId("frame-detail").textContent).toContain("frame_0001");
    });
    expect(server.gold.has("frame_0000")).toBe(true);
    const row = byTestId("row-frame_0000");
    expect(row.querySelector('[data-testid="verified-badge"]')).not.toBeNull();
  });

  it("shows the sticky verified badge on a curated frame", async () => {
    const { flow } = await mount();
    await flow.acceptAsIs();
    await flow.open(0);
    expect(byTestId("detail-verified").textContent).toBe("verified");
  });

  it("accepts with the keyboard unless focus is in a form control", async () => {
    const { flow, server } = await mount();
    bindKeyboard(flow, document);

    document.body.dispatchEvent(
      new KeyboardEvent("keydown", { key: "a", bubbles: true }),
    );
    await vi.waitFor(() => {
      expect(server.gold.size).toBe(1);
    });

    // Now typing "a" into the next frame's description must not save it.
    const desc = byTestId<HTMLTextAreaElement>("description-input");
    desc.dispatchEvent(new KeyboardEvent("keydown", { key: "a", bubbles: true }));
    await new Promise((resolve) => setTimeout(resolve, 10));
    expect(server.gold.size).toBe(1);
  });

  it("classifies typing targets", () => {
    expect(isTypingTarget(document.createElement("textarea"))).toBe(true);
    expect(isTypingTarget(document.createElement("select"))).toBe(true);
    expect(isTypingTarget(document.createElement("input"))).toBe(true);
    expect(isTypingTarget(document.createElement("button"))).toBe(false);
    expect(isTypingTarget(null)).toBe(false);
  });

  it("lazy-loads camera images and toggles native resolution on click", async () => {
    await mount([
      makeDetail("frame_0000", {
        images: { front_center: "/frames/frame_0000/image/front_center" },
      }),
    ]);
    const img = byTestId<HTMLImageElement>("image-front_center");
    expect(img.getAttribute("loading")).toBe("lazy");
    expect(img.getAttribute("src")).toBe("/frames/frame_0000/image/front_center");

    img.click();
    expect(img.classList.contains("native")).toBe(true);
    img.click();
    expect(img.classList.contains("native")).toBe(false);
  });

  it("shows flagged fields and parse failures in the reasoning console", async () => {
    await mount([
      makeDetail("frame_0000", {
        flagged_for_review: ["odd_attributes.weather"],
        scout_traces: [
          {
            scout_name: "scout-b",
            reasoning_trace: "",
            risk_score: null,
            parse_failed: true,
          },
        ],
      }),
    ]);
    expect(byTestId("flagged").textContent).toContain("odd_attributes.weather");
    expect(byTestId("console").textContent).toContain("scout-b (parse failed)");
  });

  it("ends with the all-verified notice and an empty detail pane", async () => {
    const { flow } = await mount([makeDetail("frame_0000")]);
    await flow.acceptAsIs();
    expect(byTestId("notice").textContent).toBe("every listed frame is verified");
    expect(byTestId("frame-detail").textContent).toContain("every listed frame is verified");
    expect(byTestId("progress").textContent).toBe("1/1 verified");
  });

  it("offers a retry button after a transport failure", async () => {
    const { flow, server } = await mount();
    flow.form!.setRisk(9);
    server.failNext();
    await flow.submit();

    expect(byTestId("notice").textContent).toContain("your edits are kept");
    const retry = byTestId<HTMLButtonElement>("retry");
    retry.click();
    await vi.waitFor(() => {
      expect(server.gold.get("frame_0000")?.dna.scenario_criticality.risk_score).toBe(9);
    });
  });
});
