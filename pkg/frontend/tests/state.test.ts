import { describe, expect, it } from 'vitest';

import { ApiClient, StatsReport } from '../src/api.js';
import { buildAdvertiserTree, buildWebsiteTree, StatsPanelModel } from '../src/state.js';

const REPORT: StatsReport = {
  scope: { zone: 1 },
  from: '2013-03-01T00:00:00Z',
  to: '2013-03-02T00:00:00Z',
  impressions: 100,
  clicks: 5,
  ctr: 0.05,
  revenue_micros: 1_500_000,
};

function clientReturning(responses: Array<{ status: number; body: unknown; delayMs?: number }>) {
  let call = 0;
  return new ApiClient('http://x', 't', async () => {
    const reply = responses[Math.min(call++, responses.length - 1)];
    if (reply.delayMs) {
      await new Promise((resolve) => setTimeout(resolve, reply.delayMs));
    }
    return new Response(JSON.stringify(reply.body), { status: reply.status });
  });
}

describe('inventory trees', () => {
  it('groups campaigns under advertisers and ads under campaigns, id-sorted', () => {
    const tree = buildAdvertiserTree(
      [{ id: 2, name: 'B' }, { id: 1, name: 'A' }],
      [{ id: 10, advertiser_id: 1, name: 'c1' }, { id: 11, advertiser_id: 2, name: 'c2' }],
      [{ id: 21, campaign_id: 10, title: 'x' }, { id: 20, campaign_id: 10, title: 'y' }],
    );
    expect(tree.map((n) => n.advertiser.id)).toEqual([1, 2]);
    expect(tree[0].campaigns[0].ads.map((a) => a.id)).toEqual([20, 21]);
    expect(tree[1].campaigns.map((c) => c.campaign.id)).toEqual([11]);
  });

  it('groups zones under websites', () => {
    const tree = buildWebsiteTree(
      [{ id: 4, name: 's' }],
      [{ id: 9, website_id: 4, name: 'z1' }, { id: 8, website_id: 4, name: 'z0' }],
    );
    expect(tree[0].zones.map((z) => z.id)).toEqual([8, 9]);
  });
});

describe('StatsPanelModel', () => {
  it('shows exactly the API payload', async () => {
    const panel = new StatsPanelModel(clientReturning([{ status: 200, body: REPORT }]));
    const state = await panel.load({ zone: 1 });
    expect(state.report).toEqual(REPORT);
    expect(state.error).toBeNull();
    expect(state.stale).toBe(false);
  });

  it('flags stale data and surfaces the error on failure', async () => {
    const panel = new StatsPanelModel(clientReturning([
      { status: 200, body: REPORT },
      { status: 401, body: { error: 'missing or invalid admin token' } },
    ]));
    await panel.load({ zone: 1 });
    const state = await panel.load({ zone: 1 });
    expect(state.report).toEqual(REPORT); // old numbers still visible
    expect(state.stale).toBe(true);
    expect(state.error).toContain('401');
  });

  it('applies latest-wins when responses race', async () => {
    const slowFirst = clientReturning([
      { status: 200, body: { ...REPORT, impressions: 1 }, delayMs: 50 },
      { status: 200, body: { ...REPORT, impressions: 2 }, delayMs: 1 },
    ]);
    const panel = new StatsPanelModel(slowFirst);
    const first = panel.load({ zone: 1 });
    const second = panel.load({ zone: 1 });
    await Promise.all([first, second]);
    expect(panel.state.report?.impressions).toBe(2); // slow reply must not clobber
  });
});
