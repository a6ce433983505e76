/** Browser entry point. Wires the API client, flow controller, and renderer.

The API origin defaults to wherever the page is served from; ?api=http://host
overrides it for local development against a separately-run miner.
*/

import { ApiClient } from "./api.js";
import { CuratorFlow } from "./flow.js";
import { bindKeyboard, renderApp } from "./view.js";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");

  const params = new URLSearchParams(window.location.search);
  const client = new ApiClient(params.get("api") ?? "");
  const annotator = params.get("annotator") ?? "curator";

  let vocab;
  try {
    vocab = await client.getVocab();
  } catch (error) {
    root.textContent = `cannot reach the mining server: ${String(error)}`;
    return;
  }

  const flow = new CuratorFlow(client, vocab, annotator);
  flow.subscribe(() => renderApp(root, flow));
  bindKeyboard(flow, document);

  await flow.loadList();
  await flow.openNextUnverified();
}

void boot();
