/**
 * Typed client for the gateway admin API.
 *
 * The console mutates server state exclusively through this client, and the
 * token lives only in this object (memory), never in storage.
 */

export interface EntityRow {
  id: number;
  [key: string]: unknown;
}

export interface StatsReport {
  scope: Record<string, number>;
  from: string;
  to: string;
  impressions: number;
  clicks: number;
  ctr: number;
  revenue_micros: number;
}

export interface LinkRow {
  zone_id: number;
  target_kind: 'campaign' | 'ad';
  target_id: number;
}

export type Collection = 'advertisers' | 'campaigns' | 'ads' | 'websites' | 'zones';

export interface StatsScope {
  advertiser?: number;
  campaign?: number;
  ad?: number;
  website?: number;
  zone?: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  private async request<T>(
    method: string,
    path: string,
    params?: Record<string, string | number | undefined>,
    body?: unknown,
  ): Promise<T> {
    const search = new URLSearchParams();
    for (const [key, value] of Object.entries(params ?? {})) {
      if (value !== undefined && value !== null && value !== '') {
        search.set(key, String(value));
      }
    }
    const query = search.toString();
    const url = `${this.baseUrl}${path}${query ? `?${query}` : ''}`;
    let response: Response;
    try {
      response = await this.fetchFn(url, {
        method,
        headers: {
          'X-Admin-Token': this.token,
          ...(body === undefined ? {} : { 'Content-Type': 'application/json' }),
        },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    const text = await response.text();
    if (!response.ok) {
      let message = text || `HTTP ${response.status}`;
      let field: string | undefined;
      try {
        const parsed = JSON.parse(text) as { error?: string; field?: string };
        message = parsed.error ?? message;
        field = parsed.field;
      } catch {
        /* non-JSON error body: keep raw text */
      }
      throw new ApiError(response.status, message, field);
    }
    return (text ? JSON.parse(text) : null) as T;
  }

  listEntities(collection: Collection): Promise<EntityRow[]> {
    return this.request('GET', `/api/${collection}`);
  }

  createEntity(collection: Collection, fields: Record<string, unknown>): Promise<{ id: number }> {
    return this.request('POST', `/api/${collection}`, undefined, fields);
  }

  updateEntity(collection: Collection, id: number, fields: Record<string, unknown>): Promise<EntityRow> {
    return this.request('PUT', `/api/${collection}/${id}`, undefined, fields);
  }

  listLinks(): Promise<LinkRow[]> {
    return this.request('GET', '/api/links');
  }

  createLink(zoneId: number, target: { campaignId?: number; adId?: number }): Promise<LinkRow> {
    const body: Record<string, number> = { zone_id: zoneId };
    if (target.campaignId !== undefined) body.campaign_id = target.campaignId;
    if (target.adId !== undefined) body.ad_id = target.adId;
    return this.request('POST', '/api/links', undefined, body);
  }

  getStats(scope: StatsScope, range?: { from?: string; to?: string }): Promise<StatsReport> {
    return this.request('GET', '/api/stats', { ...scope, ...range });
  }

  async getTag(zoneId: number): Promise<string> {
    const url = `${this.baseUrl}/api/tag?zoneid=${zoneId}`;
    const response = await this.fetchFn(url, { headers: { 'X-Admin-Token': this.token } });
    const text = await response.text();
    if (!response.ok) throw new ApiError(response.status, text);
    return text;
  }
}
