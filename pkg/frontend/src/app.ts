/**
 * Admin console entry point: token gate, inventory trees with add/link
 * forms, the stats dashboard and per-zone tag display. All server access
 * goes through ApiClient; the DOM here only renders what the API returned.
 */

import { ApiClient, ApiError, Collection, EntityRow, StatsScope } from './api.js';
import { formatCount, formatCtr, formatMicros } from './format.js';
import { buildAdvertiserTree, buildWebsiteTree, StatsPanelModel } from './state.js';

let client: ApiClient | null = null;
let statsPanel: StatsPanelModel | null = null;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function banner(target: HTMLElement, message: string, retry?: () => void): void {
  target.replaceChildren(
    el('div', { class: 'banner error' }, message,
      ...(retry ? [el('button', { class: 'retry' }, 'Retry')] : [])),
  );
  if (retry) {
    target.querySelector('button.retry')?.addEventListener('click', retry);
  }
}

// ---- inventory -------------------------------------------------------------

async function refreshInventory(): Promise<void> {
  if (!client) return;
  const container = document.getElementById('inventory-trees')!;
  try {
    const [advertisers, campaigns, ads, websites, zones] = await Promise.all([
      client.listEntities('advertisers'),
      client.listEntities('campaigns'),
      client.listEntities('ads'),
      client.listEntities('websites'),
      client.listEntities('zones'),
    ]);
    const advTree = el('ul', { class: 'tree' });
    for (const node of buildAdvertiserTree(advertisers, campaigns, ads)) {
      const campaignList = el('ul', {});
      for (const c of node.campaigns) {
        const adList = el('ul', {});
        for (const ad of c.ads) {
          adList.append(el('li', { 'data-kind': 'ad', 'data-id': String(ad.id) },
            `#${ad.id} ${String(ad.title)} (${ad.width}×${ad.height}, bid ${formatMicros(ad.bid_micros as number)})`));
        }
        campaignList.append(el('li', { 'data-kind': 'campaign', 'data-id': String(c.campaign.id) },
          `#${c.campaign.id} ${String(c.campaign.name)}`, adList));
      }
      advTree.append(el('li', { 'data-kind': 'advertiser', 'data-id': String(node.advertiser.id) },
        `#${node.advertiser.id} ${String(node.advertiser.name)}`, campaignList));
    }
    const siteTree = el('ul', { class: 'tree' });
    for (const node of buildWebsiteTree(websites, zones)) {
      const zoneList = el('ul', {});
      for (const zone of node.zones) {
        zoneList.append(el('li', { 'data-kind': 'zone', 'data-id': String(zone.id) },
          `#${zone.id} ${String(zone.name)} (${zone.width}×${zone.height})`));
      }
      siteTree.append(el('li', { 'data-kind': 'website', 'data-id': String(node.website.id) },
        `#${node.website.id} ${String(node.website.name)}`, zoneList));
    }
    container.replaceChildren(
      el('div', { class: 'col' }, el('h3', {}, 'Advertisers'), advTree),
      el('div', { class: 'col' }, el('h3', {}, 'Websites'), siteTree),
    );
    await refreshTags(zones);
  } catch (err) {
    banner(container, `failed to load inventory: ${String(err)}`, refreshInventory);
  }
}

const FORM_FIELDS: Record<string, { name: string; type?: string }[]> = {
  advertisers: [{ name: 'name' }, { name: 'contact' }, { name: 'email' }],
  campaigns: [
    { name: 'advertiser_id', type: 'number' }, { name: 'name' },
    { name: 'start_date' }, { name: 'end_date' },
  ],
  ads: [
    { name: 'campaign_id', type: 'number' }, { name: 'title' }, { name: 'description' },
    { name: 'display_url' }, { name: 'landing_url' }, { name: 'width', type: 'number' },
    { name: 'height', type: 'number' }, { name: 'keywords' },
    { name: 'bid_micros', type: 'number' },
  ],
  websites: [{ name: 'name' }, { name: 'url' }, { name: 'context_doc' }],
  zones: [
    { name: 'website_id', type: 'number' }, { name: 'name' },
    { name: 'width', type: 'number' }, { name: 'height', type: 'number' },
    { name: 'capacity', type: 'number' }, { name: 'source_label' },
    { name: 'context_doc' },
  ],
};

function renderEntityForm(collection: Collection): HTMLFormElement {
  const form = el('form', { class: 'entity-form', 'data-collection': collection });
  for (const field of FORM_FIELDS[collection]) {
    form.append(el('label', {}, field.name,
      el('input', { name: field.name, type: field.type ?? 'text' })));
  }
  form.append(el('button', { type: 'submit' }, `add ${collection.slice(0, -1)}`));
  form.append(el('p', { class: 'form-message' }));
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void submitEntityForm(form, collection);
  });
  return form;
}

async function submitEntityForm(form: HTMLFormElement, collection: Collection): Promise<void> {
  if (!client) return;
  const message = form.querySelector<HTMLElement>('.form-message')!;
  form.querySelectorAll('input').forEach((input) => input.classList.remove('field-error'));
  const fields: Record<string, unknown> = {};
  for (const input of form.querySelectorAll('input')) {
    if (input.value === '') continue;
    if (input.name === 'keywords') {
      fields[input.name] = input.value.split(',').map((s) => s.trim()).filter(Boolean);
    } else {
      fields[input.name] = input.type === 'number' ? Number(input.value) : input.value;
    }
  }
  try {
    const created = await client.createEntity(collection, fields);
    message.textContent = `created #${created.id}`;
    message.className = 'form-message ok';
    form.reset();
    await refreshInventory();
  } catch (err) {
    if (err instanceof ApiError && err.status === 422 && err.field) {
      const input = form.querySelector<HTMLInputElement>(`input[name="${err.field}"]`);
      input?.classList.add('field-error');
      message.textContent = err.message;
      message.className = 'form-message error';
    } else if (err instanceof ApiError && err.status === 0) {
      message.replaceChildren('network failure — ', el('button', { type: 'button' }, 'retry'));
      message.className = 'form-message error';
      message.querySelector('button')?.addEventListener('click', () => {
        void submitEntityForm(form, collection);
      });
    } else {
      message.textContent = String(err);
      message.className = 'form-message error';
    }
  }
}

function renderLinkForm(): HTMLFormElement {
  const form = el('form', { class: 'entity-form', id: 'link-form' },
    el('label', {}, 'zone_id', el('input', { name: 'zone_id', type: 'number' })),
    el('label', {}, 'target', el('select', { name: 'target_kind' },
      el('option', { value: 'campaign' }, 'campaign'),
      el('option', { value: 'ad' }, 'ad'))),
    el('label', {}, 'target_id', el('input', { name: 'target_id', type: 'number' })),
    el('button', { type: 'submit' }, 'link'),
    el('p', { class: 'form-message' }));
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void (async () => {
      if (!client) return;
      const message = form.querySelector<HTMLElement>('.form-message')!;
      const zoneId = Number(form.querySelector<HTMLInputElement>('input[name="zone_id"]')!.value);
      const kind = form.querySelector<HTMLSelectElement>('select')!.value;
      const targetId = Number(form.querySelector<HTMLInputElement>('input[name="target_id"]')!.value);
      try {
        await client.createLink(zoneId, kind === 'campaign' ? { campaignId: targetId } : { adId: targetId });
        message.textContent = `linked zone ${zoneId} → ${kind} ${targetId}`;
        message.className = 'form-message ok';
        await refreshInventory();
      } catch (err) {
        message.textContent = String(err instanceof ApiError ? err.message : err);
        message.className = 'form-message error';
      }
    })();
  });
  return form;
}

// ---- stats dashboard ---------------------------------------------------------

function renderStatsState(): void {
  if (!statsPanel) return;
  const panel = document.getElementById('stats-panel')!;
  const { report, error, stale } = statsPanel.state;
  const rows: Node[] = [];
  if (error) {
    rows.push(el('div', { class: 'banner error' },
      `stats query failed — ${error}${stale ? ' (showing stale data)' : ''}`));
  }
  if (report) {
    rows.push(el('table', { class: 'stats', ...(stale ? { 'data-stale': '1' } : {}) },
      el('tr', {}, el('th', {}, 'impressions'), el('td', { id: 'stat-impressions' }, formatCount(report.impressions))),
      el('tr', {}, el('th', {}, 'clicks'), el('td', { id: 'stat-clicks' }, formatCount(report.clicks))),
      el('tr', {}, el('th', {}, 'ctr'), el('td', { id: 'stat-ctr' }, formatCtr(report.ctr))),
      el('tr', {}, el('th', {}, 'revenue'), el('td', { id: 'stat-revenue' }, formatMicros(report.revenue_micros))),
    ));
    rows.push(el('p', { class: 'range' }, `${report.from} → ${report.to}`));
  } else if (!error) {
    rows.push(el('p', {}, 'no data loaded'));
  }
  panel.replaceChildren(...rows);
}

async function loadDashboard(): Promise<void> {
  if (!statsPanel) return;
  const kind = (document.getElementById('scope-kind') as HTMLSelectElement).value;
  const id = (document.getElementById('scope-id') as HTMLInputElement).value;
  const from = (document.getElementById('range-from') as HTMLInputElement).value;
  const to = (document.getElementById('range-to') as HTMLInputElement).value;
  const scope: StatsScope = {};
  if (kind !== 'all' && id) {
    scope[kind as keyof StatsScope] = Number(id);
  }
  await statsPanel.load(scope, { from: from || undefined, to: to || undefined });
  renderStatsState();
}

// ---- tags ---------------------------------------------------------------------

async function refreshTags(zones: EntityRow[]): Promise<void> {
  if (!client) return;
  const list = document.getElementById('tag-list')!;
  const entries: Node[] = [];
  for (const zone of zones) {
    const tag = await client.getTag(zone.id);
    const code = el('code', {}, tag);
    const copy = el('button', { type: 'button' }, 'copy');
    copy.addEventListener('click', () => {
      void navigator.clipboard?.writeText(tag);
    });
    entries.push(el('li', {}, `zone #${zone.id} ${String(zone.name)}: `, code, copy));
  }
  list.replaceChildren(...entries);
}

// ---- boot -----------------------------------------------------------------------

function showConsole(): void {
  document.getElementById('token-gate')!.hidden = true;
  document.getElementById('console-main')!.hidden = false;
  const forms = document.getElementById('entity-forms')!;
  forms.replaceChildren(
    ...(['advertisers', 'campaigns', 'ads', 'websites', 'zones'] as Collection[])
      .map(renderEntityForm),
    renderLinkForm(),
  );
  document.getElementById('stats-refresh')!.addEventListener('click', () => {
    void loadDashboard();
  });
  void refreshInventory();
}

export function boot(): void {
  const gate = document.getElementById('token-gate');
  if (!gate) return; // not on the console page
  gate.querySelector('form')!.addEventListener('submit', (event) => {
    event.preventDefault();
    const token = (document.getElementById('token-input') as HTMLInputElement).value;
    client = new ApiClient(window.location.origin, token);
    statsPanel = new StatsPanelModel(client);
    showConsole();
  });
}

boot();
