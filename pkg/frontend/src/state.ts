/**
 * View-model layer: inventory trees assembled from API rows, and the stats
 * panel model with latest-wins query cancellation. No DOM access here, so
 * everything is unit-testable.
 */

import { ApiClient, ApiError, EntityRow, StatsReport, StatsScope } from './api.js';

export interface CampaignNode {
  campaign: EntityRow;
  ads: EntityRow[];
}

export interface AdvertiserNode {
  advertiser: EntityRow;
  campaigns: CampaignNode[];
}

export interface WebsiteNode {
  website: EntityRow;
  zones: EntityRow[];
}

function byId(rows: EntityRow[]): EntityRow[] {
  return [...rows].sort((a, b) => a.id - b.id);
}

export function buildAdvertiserTree(
  advertisers: EntityRow[],
  campaigns: EntityRow[],
  ads: EntityRow[],
): AdvertiserNode[] {
  return byId(advertisers).map((advertiser) => ({
    advertiser,
    campaigns: byId(campaigns.filter((c) => c.advertiser_id === advertiser.id)).map(
      (campaign) => ({
        campaign,
        ads: byId(ads.filter((a) => a.campaign_id === campaign.id)),
      }),
    ),
  }));
}

export function buildWebsiteTree(websites: EntityRow[], zones: EntityRow[]): WebsiteNode[] {
  return byId(websites).map((website) => ({
    website,
    zones: byId(zones.filter((z) => z.website_id === website.id)),
  }));
}

export interface DashboardState {
  report: StatsReport | null;
  error: string | null;
  /** true when the visible report predates the last (failed) refresh */
  stale: boolean;
  loading: boolean;
}

export class StatsPanelModel {
  state: DashboardState = { report: null, error: null, stale: false, loading: false };

  private generation = 0;

  constructor(private client: ApiClient) {}

  /**
   * Query the stats endpoint; the panel shows exactly what the API returned.
   * Only the newest in-flight request may touch the state (latest wins).
   */
  async load(scope: StatsScope, range?: { from?: string; to?: string }): Promise<DashboardState> {
    const ticket = ++this.generation;
    this.state = { ...this.state, loading: true };
    try {
      const report = await this.client.getStats(scope, range);
      if (ticket === this.generation) {
        this.state = { report, error: null, stale: false, loading: false };
      }
    } catch (err) {
      if (ticket === this.generation) {
        const message = err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
        this.state = { ...this.state, error: message, stale: this.state.report !== null, loading: false };
      }
    }
    return this.state;
  }
}
